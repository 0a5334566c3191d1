#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "picore/coreset.hpp"
#include "picore/fno.hpp"
#include "picore/grid.hpp"

namespace picore::io {

inline constexpr const char* kToolVersion = "0.1.0";

/// FNV-1a hash of a string, hex-encoded; stamps configs into outputs.
uint64_t fnv1a64(const std::string& text);
std::string hash_hex(const std::string& text);

/// Binary record: magic "PICF", u32 format version, u32 ndims, u64 dims[],
/// then row-major little-endian float64 payload.
void write_picf(const std::filesystem::path& path, const std::vector<int64_t>& shape,
                const std::vector<double>& data);
std::pair<std::vector<int64_t>, std::vector<double>> read_picf(
    const std::filesystem::path& path);

void write_field(const std::filesystem::path& path, const Field& field);
Field read_field(const std::filesystem::path& path, const GridSpec& grid);

/// One directory per dataset: manifest.json plus one record per sample.
/// Inputs and solutions are stored separately so labels can be absent.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset,
                   const std::vector<uint64_t>& sample_seeds,
                   const std::string& config_hash = "");
Dataset read_dataset(const std::filesystem::path& dir);

/// Checkpoint: PICF header, config JSON, then the flat parameter vector.
/// Round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const fno::FnoParams& params);
fno::FnoParams load_checkpoint(const std::filesystem::path& path);

void write_selection(const std::filesystem::path& path,
                     const coreset::CoresetSelection& selection);
coreset::CoresetSelection read_selection(const std::filesystem::path& path);

}  // namespace picore::io
