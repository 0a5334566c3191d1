#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "picore/coreset.hpp"
#include "picore/rng.hpp"

using namespace picore;
using namespace picore::coreset;

namespace {

FeatureMatrix features_from(const Eigen::MatrixXd& columns) {
    FeatureMatrix f;
    f.columns = columns;
    f.per_sample_loss = Eigen::VectorXd::Zero(columns.cols());
    return f;
}

Eigen::MatrixXd random_columns(int d, int n, uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd m(d, n);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = rng.normal();
    return m;
}

/// Exhaustive facility-location optimum over all k-subsets.
double brute_force_fl(const Eigen::MatrixXd& sim, int k) {
    int n = static_cast<int>(sim.rows());
    std::vector<int> subset(k);
    double best = -1.0;
    std::function<void(int, int)> recurse = [&](int start, int depth) {
        if (depth == k) {
            best = std::max(best, facility_location_value(sim, subset));
            return;
        }
        for (int i = start; i < n; ++i) {
            subset[depth] = i;
            recurse(i + 1, depth + 1);
        }
    };
    recurse(0, 0);
    return best;
}

void check_selection_invariants(const CoresetSelection& s, int n, int k,
                                bool exact_size = true) {
    if (exact_size) CHECK(static_cast<int>(s.indices.size()) == k);
    std::vector<int> sorted = s.indices;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
    for (int i : s.indices) {
        CHECK(i >= 0);
        CHECK(i < n);
    }
    for (double w : s.weights) CHECK(w > 0.0);
    CHECK(s.weights.size() == s.indices.size());
}

}  // namespace

TEST_CASE("similarity_matrix: identical columns, symmetry, hand-computed entries") {
    Eigen::MatrixXd identical(3, 4);
    identical << 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3;
    Eigen::MatrixXd s = similarity_matrix(identical);
    CHECK(s.maxCoeff() == 0.0);
    CHECK(s.minCoeff() == 0.0);

    Eigen::MatrixXd three(2, 3);
    three << 0, 3, 0, 0, 0, 4;
    // Distances: d01 = 3, d02 = 4, d12 = 5; M = 5.
    Eigen::MatrixXd sim = similarity_matrix(three);
    CHECK(sim(0, 1) == doctest::Approx(2.0));
    CHECK(sim(0, 2) == doctest::Approx(1.0));
    CHECK(sim(1, 2) == doctest::Approx(0.0));
    CHECK(sim.isApprox(sim.transpose()));
    for (int i = 0; i < 3; ++i) {
        CHECK(sim(i, i) == doctest::Approx(5.0));
        CHECK(sim.row(i).maxCoeff() == doctest::Approx(5.0));
    }
}

TEST_CASE("facility location is monotone submodular on random matrices") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        int n = 4 + static_cast<int>(seed);
        Eigen::MatrixXd sim = similarity_matrix(random_columns(3, n, 100 + seed));

        // All pairs S subset of T, z not in T, via ternary masks.
        int64_t combos = 1;
        for (int i = 0; i < n; ++i) combos *= 3;
        for (int64_t code = 0; code < combos; ++code) {
            std::vector<int> s_set, t_set;
            int64_t rem = code;
            for (int i = 0; i < n; ++i) {
                int digit = rem % 3;
                rem /= 3;
                if (digit == 2) s_set.push_back(i);
                if (digit >= 1) t_set.push_back(i);
            }
            for (int z = 0; z < n; ++z) {
                if (std::find(t_set.begin(), t_set.end(), z) != t_set.end()) continue;
                auto with = [&](std::vector<int> set) {
                    set.push_back(z);
                    return facility_location_value(sim, set);
                };
                double gain_s = with(s_set) - facility_location_value(sim, s_set);
                double gain_t = with(t_set) - facility_location_value(sim, t_set);
                CHECK(gain_s >= gain_t - 1e-12);
                CHECK(gain_t >= -1e-12);  // monotone
            }
        }
    }
}

TEST_CASE("select_craig: identical gradients collapse to one weighted pick") {
    Eigen::MatrixXd cols(2, 3);
    cols << 1, 1, 1, 2, 2, 2;
    CoresetSelection s = select_craig(features_from(cols), 1, 0, 7);
    CHECK(s.indices.size() == 1);
    CHECK(s.weights[0] == doctest::Approx(3.0));
}

TEST_CASE("select_craig: duplicate pair plus antipode") {
    Eigen::MatrixXd cols(2, 3);
    cols << 1, 1, -1, 0, 0, 0;  // {g, g, -g}
    CoresetSelection s = select_craig(features_from(cols), 2, 3, 3);
    std::vector<int> sorted = s.indices;
    std::sort(sorted.begin(), sorted.end());
    bool duplicate_plus_antipode = (sorted == std::vector<int>{0, 2}) ||
                                   (sorted == std::vector<int>{1, 2});
    CHECK(duplicate_plus_antipode);
    std::vector<double> weights = s.weights;
    std::sort(weights.begin(), weights.end());
    CHECK(weights == std::vector<double>{1.0, 2.0});
}

TEST_CASE("select_craig: full-pool greedy is within (1 - 1/e) of the optimum") {
    for (uint64_t seed = 0; seed < 50; ++seed) {
        FeatureMatrix f = features_from(random_columns(4, 10, 500 + seed));
        Eigen::MatrixXd sim = similarity_matrix(f.columns);
        CoresetSelection s = select_craig(f, 3, 10, seed);
        double greedy = facility_location_value(sim, s.indices);
        double best = brute_force_fl(sim, 3);
        CHECK(greedy >= (1.0 - std::exp(-1.0)) * best - 1e-12);
        check_selection_invariants(s, 10, 3);

        // CRAIG weights: positive integers summing to n.
        double total = 0.0;
        for (double w : s.weights) {
            CHECK(w == std::round(w));
            total += w;
        }
        CHECK(total == doctest::Approx(10.0));
    }
}

TEST_CASE("select_craig: deterministic per seed") {
    FeatureMatrix f = features_from(random_columns(5, 20, 9));
    CoresetSelection a = select_craig(f, 6, 4, 123);
    CoresetSelection b = select_craig(f, 6, 4, 123);
    CHECK(a.indices == b.indices);
    CHECK(a.weights == b.weights);
    CHECK_THROWS_AS(select_craig(f, 0, 4, 1), BudgetOutOfRange);
    CHECK_THROWS_AS(select_craig(f, 21, 4, 1), BudgetOutOfRange);
}

TEST_CASE("select_gradmatch: one-sparse exact representation") {
    // Orthogonal columns, b = mean = (1/n) sum g_i; with g_3 = 4 * e_3 and the
    // rest tiny orthogonal directions, the first OMP pick is column 3.
    Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(4, 4);
    cols(0, 0) = 1e-3;
    cols(1, 1) = 1e-3;
    cols(2, 2) = 1e-3;
    cols(3, 3) = 4.0;
    CoresetSelection s = select_gradmatch(features_from(cols), 1, 1e-12);
    CHECK(s.indices == std::vector<int>{3});
    // b projects onto column 3 with coefficient 1/n.
    CHECK(s.weights[0] == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("select_gradmatch: exact recovery of a non-negative 2-sparse combination") {
    Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(6, 5);
    for (int j = 0; j < 5; ++j) cols(j, j) = 1.0;
    // b = 0.6 e_1 + 0.3 e_4 exactly (mean of columns scaled to match).
    FeatureMatrix f = features_from(cols);
    // Forge the target by overriding columns so that mean = 0.6 e1 + 0.3 e4:
    // use columns {3 e1, 1.5 e4, 0, 0, 0} -> mean = (3 e1 + 1.5 e4)/5.
    f.columns = Eigen::MatrixXd::Zero(6, 5);
    f.columns(1, 0) = 3.0;
    f.columns(4, 1) = 1.5;
    f.columns(0, 2) = 1e-9;
    f.columns(2, 3) = 1e-9;
    f.columns(3, 4) = 1e-9;
    CoresetSelection s = select_gradmatch(f, 2, 1e-12);
    std::vector<int> sorted = s.indices;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{0, 1});

    Eigen::VectorXd b = f.columns.rowwise().mean();
    Eigen::VectorXd residual = b;
    for (size_t i = 0; i < s.indices.size(); ++i)
        residual -= s.weights[i] * f.columns.col(s.indices[i]);
    CHECK(residual.norm() <= 1e-8);
}

namespace {

/// Lawson-Hanson style active-set NNLS, used as an independent oracle.
Eigen::VectorXd nnls_oracle(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    int n = static_cast<int>(a.cols());
    std::vector<bool> passive(n, false);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (int outer = 0; outer < 30 * n; ++outer) {
        Eigen::VectorXd w = a.transpose() * (b - a * x);
        int best = -1;
        double best_w = 1e-10;
        for (int j = 0; j < n; ++j)
            if (!passive[j] && w(j) > best_w) {
                best_w = w(j);
                best = j;
            }
        if (best < 0) break;
        passive[best] = true;
        while (true) {
            std::vector<int> p;
            for (int j = 0; j < n; ++j)
                if (passive[j]) p.push_back(j);
            Eigen::MatrixXd ap(a.rows(), p.size());
            for (size_t c = 0; c < p.size(); ++c) ap.col(c) = a.col(p[c]);
            Eigen::VectorXd z =
                ap.colPivHouseholderQr().solve(b);
            bool feasible = true;
            double alpha = 1.0;
            for (size_t c = 0; c < p.size(); ++c) {
                if (z(c) <= 0.0) {
                    feasible = false;
                    double step = x(p[c]) / (x(p[c]) - z(c));
                    alpha = std::min(alpha, step);
                }
            }
            if (feasible) {
                x.setZero();
                for (size_t c = 0; c < p.size(); ++c) x(p[c]) = z(c);
                break;
            }
            for (size_t c = 0; c < p.size(); ++c)
                x(p[c]) += alpha * (z(c) - x(p[c]));
            for (int j = 0; j < n; ++j)
                if (passive[j] && x(j) <= 1e-12) {
                    passive[j] = false;
                    x(j) = 0.0;
                }
        }
    }
    return x;
}

}  // namespace

TEST_CASE("select_gradmatch: residual non-increasing and k=n matches the NNLS oracle") {
    for (uint64_t seed = 0; seed < 50; ++seed) {
        FeatureMatrix f = features_from(random_columns(6, 8, 700 + seed));
        Eigen::VectorXd b = f.columns.rowwise().mean();

        double prev = b.norm();
        double prev_x_norm_sq = 0.0;
        for (int k = 1; k <= 8; ++k) {
            CoresetSelection s = select_gradmatch(f, k, 1e-4);
            Eigen::VectorXd residual = b;
            double x_norm_sq = 0.0;
            for (size_t i = 0; i < s.indices.size(); ++i) {
                residual -= s.weights[i] * f.columns.col(s.indices[i]);
                x_norm_sq += s.weights[i] * s.weights[i];
            }
            // Ridge trades a little residual for weight shrinkage; the exact
            // guarantee is on the regularized objective.
            CHECK(residual.squaredNorm() <= prev * prev + 1e-4 * prev_x_norm_sq + 1e-12);
            prev = residual.norm();
            prev_x_norm_sq = x_norm_sq;
            check_selection_invariants(s, 8, k, false);
            CHECK(static_cast<int>(s.indices.size()) <= k);
        }

        CoresetSelection full = select_gradmatch(f, 8, 1e-12);
        Eigen::VectorXd residual = b;
        for (size_t i = 0; i < full.indices.size(); ++i)
            residual -= full.weights[i] * f.columns.col(full.indices[i]);
        Eigen::VectorXd x_star = nnls_oracle(f.columns, b);
        double oracle_residual = (b - f.columns * x_star).norm();
        CHECK(residual.norm() <= oracle_residual + 1e-6);
    }
}

TEST_CASE("hutchinson_diag: exact on diagonal operators") {
    std::vector<double> diag = {3.0, -1.5, 0.0, 7.25};
    auto hvp = [&](const std::vector<double>& z) {
        std::vector<double> out(z.size());
        for (size_t i = 0; i < z.size(); ++i) out[i] = diag[i] * z[i];
        return out;
    };
    // Single probe suffices: z_i * d_i * z_i = d_i for Rademacher z.
    auto est = hutchinson_diag(hvp, 4, 1, 5);
    for (int i = 0; i < 4; ++i) CHECK(est[i] == doctest::Approx(diag[i]).epsilon(1e-14));

    auto identity = [](const std::vector<double>& z) { return z; };
    auto ones = hutchinson_diag(identity, 6, 3, 9);
    for (double v : ones) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("hutchinson_diag: concentration on a random symmetric matrix") {
    int d = 8;
    Eigen::MatrixXd m = random_columns(d, d, 31);
    Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    auto hvp = [&](const std::vector<double>& z) {
        Eigen::Map<const Eigen::VectorXd> zv(z.data(), d);
        Eigen::VectorXd out = sym * zv;
        return std::vector<double>(out.data(), out.data() + d);
    };
    int probes = 10000;
    auto est = hutchinson_diag(hvp, d, probes, 11);
    for (int i = 0; i < d; ++i) {
        double bound = 5.0 * sym.row(i).norm() / std::sqrt(static_cast<double>(probes));
        CHECK(std::fabs(est[i] - sym(i, i)) <= bound);
    }
}

TEST_CASE("select_adacore: identity preconditioner reproduces craig") {
    FeatureMatrix f = features_from(random_columns(4, 12, 55));
    std::vector<double> ones(4, 1.0);
    CoresetSelection craig = select_craig(f, 4, 3, 21);
    CoresetSelection ada = select_adacore(f, 4, ones, 0.0, 3, 21);
    CHECK(craig.indices == ada.indices);
    CHECK(craig.weights == ada.weights);
}

TEST_CASE("select_adacore: duplicated columns still share one representative") {
    Eigen::MatrixXd cols(2, 4);
    cols << 1, 1, 5, -2, 2, 2, 1, 3;
    std::vector<double> diag = {10.0, 0.5};
    CoresetSelection s = select_adacore(features_from(cols), 2, diag, 1e-6, 4, 3);
    // Columns 0 and 1 are identical; they can never both be selected by a
    // facility-location gain (the duplicate adds zero gain while any other
    // candidate adds a positive one).
    bool both_duplicates =
        std::find(s.indices.begin(), s.indices.end(), 0) != s.indices.end() &&
        std::find(s.indices.begin(), s.indices.end(), 1) != s.indices.end();
    CHECK_FALSE(both_duplicates);
}

TEST_CASE("select_adacore: preconditioning undoes a coordinate scaling") {
    // Three points; the 1-median under facility location is index 0 in the
    // unscaled geometry, but scaling coordinate 0 by 100 moves it to index 1.
    Eigen::MatrixXd base(2, 3);
    base << 0.0, 0.1, 0.1, 1.0, 0.0, 2.0;
    CoresetSelection unscaled = select_craig(features_from(base), 1, 3, 2);
    CHECK(unscaled.indices == std::vector<int>{0});

    Eigen::MatrixXd scaled = base;
    scaled.row(0) *= 100.0;
    CoresetSelection flipped = select_craig(features_from(scaled), 1, 3, 2);
    CHECK(flipped.indices == std::vector<int>{1});

    std::vector<double> hess_diag = {100.0, 1.0};
    CoresetSelection restored =
        select_adacore(features_from(scaled), 1, hess_diag, 1e-9, 3, 2);
    CHECK(restored.indices == std::vector<int>{0});
}

TEST_CASE("select_el2n: top-k by loss with sort oracle") {
    CoresetSelection s = select_el2n({1.0, 5.0, 3.0}, 1);
    CHECK(s.indices == std::vector<int>{1});
    CHECK(s.weights[0] == doctest::Approx(3.0));

    CoresetSelection all = select_el2n({1.0, 5.0, 3.0}, 3);
    CHECK(all.indices == std::vector<int>{1, 2, 0});
    for (double w : all.weights) CHECK(w == doctest::Approx(1.0));

    for (uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(900 + seed);
        int n = 5 + static_cast<int>(rng.uniform_int(0, 15));
        int k = 1 + static_cast<int>(rng.uniform_int(0, n - 1));
        std::vector<double> losses(n);
        for (double& v : losses) v = rng.uniform(-1.0, 1.0);
        CoresetSelection sel = select_el2n(losses, k);

        std::vector<int> oracle(n);
        std::iota(oracle.begin(), oracle.end(), 0);
        std::stable_sort(oracle.begin(), oracle.end(), [&](int a, int b) {
            if (losses[a] != losses[b]) return losses[a] > losses[b];
            return a < b;
        });
        oracle.resize(k);
        CHECK(sel.indices == oracle);
        check_selection_invariants(sel, n, k);
    }
}

TEST_CASE("select_grand: norm ordering, permutation equivariance, sort oracle") {
    Eigen::MatrixXd cols(3, 3);
    Eigen::VectorXd g(3);
    g << 1, 2, 2;
    cols.col(0) = 1.0 * g;
    cols.col(1) = 3.0 * g;
    cols.col(2) = 2.0 * g;
    CoresetSelection s = select_grand(features_from(cols), 1);
    CHECK(s.indices == std::vector<int>{1});

    // Permuting columns permutes the selection.
    Eigen::MatrixXd permuted(3, 3);
    permuted.col(0) = cols.col(2);
    permuted.col(1) = cols.col(0);
    permuted.col(2) = cols.col(1);
    CoresetSelection sp = select_grand(features_from(permuted), 1);
    CHECK(sp.indices == std::vector<int>{2});

    for (uint64_t seed = 0; seed < 50; ++seed) {
        Eigen::MatrixXd random = random_columns(4, 9, 1100 + seed);
        CoresetSelection sel = select_grand(features_from(random), 4);
        std::vector<int> oracle(9);
        std::iota(oracle.begin(), oracle.end(), 0);
        std::stable_sort(oracle.begin(), oracle.end(), [&](int a, int b) {
            double na = random.col(a).norm(), nb = random.col(b).norm();
            if (na != nb) return na > nb;
            return a < b;
        });
        oracle.resize(4);
        CHECK(sel.indices == oracle);
    }
}

TEST_CASE("select_kmeans: degenerate budget, cluster recovery, determinism") {
    Eigen::MatrixXd all = random_columns(3, 7, 77);
    CoresetSelection everything = select_kmeans(all, 7, 50, 5);
    std::vector<int> sorted = everything.indices;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6});

    // Two well-separated clusters; k = 2 should pick one point from each.
    int hits = 0;
    for (uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(1300 + seed);
        Eigen::MatrixXd pts(2, 10);
        for (int j = 0; j < 5; ++j)
            pts.col(j) << rng.normal() * 0.1, rng.normal() * 0.1;
        for (int j = 5; j < 10; ++j)
            pts.col(j) << 50.0 + rng.normal() * 0.1, 50.0 + rng.normal() * 0.1;
        CoresetSelection s = select_kmeans(pts, 2, 100, seed);
        bool left = s.indices[0] < 5 || s.indices[1] < 5;
        bool right = s.indices[0] >= 5 || s.indices[1] >= 5;
        if (left && right) ++hits;
    }
    CHECK(hits >= 99);

    CoresetSelection a = select_kmeans(all, 3, 100, 9);
    CoresetSelection b = select_kmeans(all, 3, 100, 9);
    CHECK(a.indices == b.indices);
}

TEST_CASE("select_cosine: duplicates deferred, orthogonality, scale invariance") {
    // Duplicate of the largest-norm vector is selected only after every other
    // direction is exhausted.
    Eigen::MatrixXd cols(3, 4);
    cols.col(0) << 2, 0, 0;
    cols.col(1) << 2, 0, 0;  // exact duplicate
    cols.col(2) << 0, 1, 0;
    cols.col(3) << 0, 0, 1;
    CoresetSelection s = select_cosine(cols, 4);
    CHECK(s.indices.back() == 1);

    Eigen::MatrixXd ortho(2, 2);
    ortho << 1, 0, 0, 3;
    CoresetSelection both = select_cosine(ortho, 2);
    std::vector<int> sorted = both.indices;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{0, 1});

    // Positive rescaling of any input leaves the selection unchanged.
    Eigen::MatrixXd base = random_columns(4, 6, 1500);
    CoresetSelection before = select_cosine(base, 3);
    Eigen::MatrixXd rescaled = base;
    rescaled.col(2) *= 7.5;
    // Rescaling can change the start vector (largest norm); keep it fixed by
    // scaling a non-start column only when column 2 is not the start.
    if (before.indices[0] != 2) {
        // Make sure the start still has the largest norm.
        rescaled.col(before.indices[0]) *= 100.0;
        Eigen::MatrixXd control = base;
        control.col(before.indices[0]) *= 100.0;
        CoresetSelection after = select_cosine(rescaled, 3);
        CoresetSelection ctrl = select_cosine(control, 3);
        CHECK(after.indices == ctrl.indices);
    }

    Eigen::MatrixXd with_zero(2, 2);
    with_zero << 1, 0, 0, 0;
    CHECK_THROWS_AS(select_cosine(with_zero, 1), ZeroVector);
}

TEST_CASE("select_herding: first pick, tie order, moment matching") {
    Eigen::MatrixXd cols = random_columns(3, 8, 1714);
    Eigen::VectorXd mean = cols.rowwise().mean();
    CoresetSelection first = select_herding(cols, 1);
    int expect = 0;
    double best = -1e300;
    for (int j = 0; j < 8; ++j) {
        if (mean.dot(cols.col(j)) > best) {
            best = mean.dot(cols.col(j));
            expect = j;
        }
    }
    CHECK(first.indices == std::vector<int>{expect});

    Eigen::MatrixXd identical(2, 5);
    for (int j = 0; j < 5; ++j) identical.col(j) << 1.0, 2.0;
    CoresetSelection ties = select_herding(identical, 3);
    CHECK(ties.indices == std::vector<int>{0, 1, 2});

    // The running mean of the selected set approaches the dataset mean;
    // monotone on this instance (herding only guarantees O(1/k) decay, so the
    // per-step check is frozen to data where it holds), exact at k = n.
    double prev = 1e300;
    double final_gap = -1.0;
    for (int k = 1; k <= 8; ++k) {
        CoresetSelection s = select_herding(cols, k);
        Eigen::VectorXd sel_mean = Eigen::VectorXd::Zero(3);
        for (int i : s.indices) sel_mean += cols.col(i);
        sel_mean /= static_cast<double>(k);
        double gap = (sel_mean - mean).norm();
        CHECK(gap <= prev + 1e-12);
        prev = gap;
        final_gap = gap;
    }
    CHECK(final_gap <= 1e-12);
}
