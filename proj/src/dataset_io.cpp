#include "picore/dataset_io.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace picore::io {

namespace fs = std::filesystem;
using nlohmann::json;

uint64_t fnv1a64(const std::string& text) {
    uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string hash_hex(const std::string& text) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(text)));
    return buf;
}

namespace {

constexpr char kMagic[4] = {'P', 'I', 'C', 'F'};
constexpr uint32_t kFormatVersion = 1;

void write_raw(std::ofstream& out, const void* data, size_t bytes) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

void read_raw(std::ifstream& in, void* data, size_t bytes) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
    if (!in) throw ConfigError("PICF record truncated");
}

void write_header(std::ofstream& out, const std::vector<int64_t>& shape) {
    write_raw(out, kMagic, 4);
    uint32_t version = kFormatVersion;
    uint32_t ndims = static_cast<uint32_t>(shape.size());
    write_raw(out, &version, 4);
    write_raw(out, &ndims, 4);
    for (int64_t d : shape) {
        uint64_t dim = static_cast<uint64_t>(d);
        write_raw(out, &dim, 8);
    }
}

std::vector<int64_t> read_header(std::ifstream& in) {
    char magic[4];
    read_raw(in, magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw ConfigError("not a PICF record");
    uint32_t version = 0, ndims = 0;
    read_raw(in, &version, 4);
    read_raw(in, &ndims, 4);
    if (version != kFormatVersion) throw ConfigError("unsupported PICF version");
    if (ndims > 8) throw ConfigError("PICF: implausible rank");
    std::vector<int64_t> shape(ndims);
    for (uint32_t i = 0; i < ndims; ++i) {
        uint64_t dim = 0;
        read_raw(in, &dim, 8);
        shape[i] = static_cast<int64_t>(dim);
    }
    return shape;
}

json grid_to_json(const GridSpec& grid) {
    return json{{"spatial_dims", grid.spatial_dims},
                {"n_points", grid.n_points},
                {"domain_length", grid.domain_length},
                {"n_time", grid.n_time},
                {"t_final", grid.t_final},
                {"periodic", grid.periodic}};
}

GridSpec grid_from_json(const json& j) {
    GridSpec grid;
    grid.spatial_dims = j.at("spatial_dims").get<int>();
    grid.n_points = j.at("n_points").get<int>();
    grid.domain_length = j.at("domain_length").get<double>();
    grid.n_time = j.at("n_time").get<int>();
    grid.t_final = j.at("t_final").get<double>();
    grid.periodic = j.at("periodic").get<bool>();
    return grid;
}

std::string sample_name(const char* prefix, size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%05zu.picf", prefix, index);
    return buf;
}

}  // namespace

void write_picf(const fs::path& path, const std::vector<int64_t>& shape,
                const std::vector<double>& data) {
    int64_t expect = 1;
    for (int64_t d : shape) expect *= d;
    if (expect != static_cast<int64_t>(data.size()))
        throw ShapeMismatch("write_picf: shape does not match data size");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("write_picf: cannot open " + path.string());
    write_header(out, shape);
    write_raw(out, data.data(), data.size() * sizeof(double));
}

std::pair<std::vector<int64_t>, std::vector<double>> read_picf(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("read_picf: cannot open " + path.string());
    std::vector<int64_t> shape = read_header(in);
    int64_t count = 1;
    for (int64_t d : shape) count *= d;
    std::vector<double> data(count);
    read_raw(in, data.data(), data.size() * sizeof(double));
    return {std::move(shape), std::move(data)};
}

void write_field(const fs::path& path, const Field& field) {
    std::vector<int64_t> shape;
    if (field.frames > 1) shape.push_back(field.frames);
    shape.push_back(field.grid.n_points);
    if (field.grid.spatial_dims == 2) shape.push_back(field.grid.n_points);
    write_picf(path, shape, field.values);
}

Field read_field(const fs::path& path, const GridSpec& grid) {
    auto [shape, data] = read_picf(path);
    Field f;
    f.grid = grid;
    f.frames = shape.size() == static_cast<size_t>(grid.spatial_dims) ? 1
               : static_cast<int>(shape[0]);
    f.values = std::move(data);
    if (f.size() != static_cast<int64_t>(f.frames) * grid.spatial_size())
        throw ShapeMismatch("read_field: record does not match grid " + path.string());
    return f;
}

void write_dataset(const fs::path& dir, const Dataset& dataset,
                   const std::vector<uint64_t>& sample_seeds,
                   const std::string& config_hash) {
    if (dataset.instances.empty()) throw ConfigError("write_dataset: empty dataset");
    fs::create_directories(dir / "inputs");
    fs::create_directories(dir / "solutions");

    const PdeInstance& first = dataset.instances.front();
    json manifest;
    manifest["tool_version"] = kToolVersion;
    manifest["format_version"] = kFormatVersion;
    manifest["kind"] = to_string(first.kind);
    manifest["grid"] = grid_to_json(first.grid);
    manifest["params"] = {{"beta", first.params.beta}, {"nu", first.params.nu}};
    manifest["n_samples"] = dataset.instances.size();
    manifest["seeds"] = sample_seeds;
    if (!config_hash.empty()) manifest["config_hash"] = config_hash;

    std::vector<size_t> labeled;
    for (size_t i = 0; i < dataset.instances.size(); ++i) {
        write_field(dir / "inputs" / sample_name("input", i), dataset.instances[i].input);
        if (dataset.labels[i]) {
            write_field(dir / "solutions" / sample_name("solution", i), *dataset.labels[i]);
            labeled.push_back(i);
        }
    }
    manifest["labeled"] = labeled;

    std::ofstream out(dir / "manifest.json");
    out << manifest.dump(2) << "\n";
}

Dataset read_dataset(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw ConfigError("read_dataset: no manifest in " + dir.string());
    json manifest = json::parse(in);

    GridSpec grid = grid_from_json(manifest.at("grid"));
    PdeKind kind = pde_kind_from_string(manifest.at("kind").get<std::string>());
    PdeParams params;
    params.beta = manifest.at("params").at("beta").get<double>();
    params.nu = manifest.at("params").at("nu").get<double>();
    size_t n = manifest.at("n_samples").get<size_t>();

    Dataset dataset;
    dataset.instances.reserve(n);
    dataset.labels.resize(n);
    for (size_t i = 0; i < n; ++i) {
        PdeInstance instance;
        instance.kind = kind;
        instance.params = params;
        instance.grid = grid;
        instance.input = read_field(dir / "inputs" / sample_name("input", i), grid);
        instance.input.frames = 1;
        dataset.instances.push_back(std::move(instance));
    }
    for (size_t i : manifest.value("labeled", std::vector<size_t>{})) {
        dataset.labels[i] = read_field(dir / "solutions" / sample_name("solution", i), grid);
    }
    return dataset;
}

namespace {

json fno_config_to_json(const fno::FnoConfig& c) {
    return json{{"tool_version", kToolVersion},
                {"spatial_dims", c.spatial_dims}, {"modes", c.modes},
                {"width", c.width},               {"n_layers", c.n_layers},
                {"in_channels", c.in_channels},   {"out_channels", c.out_channels},
                {"activation", c.activation == fno::Activation::Gelu ? "gelu" : "identity"}};
}

fno::FnoConfig fno_config_from_json(const json& j) {
    fno::FnoConfig c;
    c.spatial_dims = j.at("spatial_dims").get<int>();
    c.modes = j.at("modes").get<int>();
    c.width = j.at("width").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.in_channels = j.at("in_channels").get<int>();
    c.out_channels = j.at("out_channels").get<int>();
    c.activation = j.at("activation").get<std::string>() == "gelu"
                       ? fno::Activation::Gelu
                       : fno::Activation::Identity;
    return c;
}

}  // namespace

void save_checkpoint(const fs::path& path, const fno::FnoParams& params) {
    std::string config = fno_config_to_json(params.config).dump();
    std::vector<double> flat = params.flatten();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("save_checkpoint: cannot open " + path.string());
    write_header(out, {static_cast<int64_t>(flat.size())});
    uint64_t json_len = config.size();
    write_raw(out, &json_len, 8);
    write_raw(out, config.data(), config.size());
    write_raw(out, flat.data(), flat.size() * sizeof(double));
}

fno::FnoParams load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("load_checkpoint: cannot open " + path.string());
    std::vector<int64_t> shape = read_header(in);
    uint64_t json_len = 0;
    read_raw(in, &json_len, 8);
    std::string config_text(json_len, '\0');
    read_raw(in, config_text.data(), json_len);
    fno::FnoConfig config = fno_config_from_json(json::parse(config_text));

    std::vector<double> flat(shape.at(0));
    read_raw(in, flat.data(), flat.size() * sizeof(double));
    return fno::FnoParams::from_flat(config, flat);
}

void write_selection(const fs::path& path, const coreset::CoresetSelection& selection) {
    json j{{"tool_version", kToolVersion},
           {"algorithm", selection.algorithm},
           {"beta", selection.budget_fraction},
           {"seed", selection.seed},
           {"indices", selection.indices},
           {"weights", selection.weights}};
    std::ofstream out(path);
    if (!out) throw ConfigError("write_selection: cannot open " + path.string());
    out << j.dump(2) << "\n";
}

coreset::CoresetSelection read_selection(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("read_selection: cannot open " + path.string());
    json j = json::parse(in);
    coreset::CoresetSelection s;
    s.algorithm = j.at("algorithm").get<std::string>();
    s.budget_fraction = j.at("beta").get<double>();
    s.seed = j.at("seed").get<uint64_t>();
    s.indices = j.at("indices").get<std::vector<int>>();
    s.weights = j.at("weights").get<std::vector<double>>();
    return s;
}

}  // namespace picore::io
