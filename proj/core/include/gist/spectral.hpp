#pragma once

#include "gist/graph.hpp"
#include "gist/matrix.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace gist {

/// Ascending eigenvalue list of a (normalized) Laplacian.
struct Spectrum {
    std::vector<double> values;   // non-decreasing
    std::size_t source_size = 0;  // matrix dimension the values came from

    double operator[](std::size_t i) const { return values[i]; }
    std::size_t size() const { return values.size(); }
};

/// Eigenvalues plus the orthonormal matrix whose columns are eigenvectors.
struct EigenPair {
    Spectrum values;
    Matrix vectors;  // n x n, column i pairs with values[i]
};

struct InterpolationConfig {
    double alpha = 0.9;  // in [0, 1]; weight of the second (epsilon) operand
};

/// Dense symmetric eigendecomposition: Householder tridiagonalization followed
/// by implicit-shift QL, double precision. Eigenvalues come back ascending and
/// each eigenvector is sign-fixed (first entry above 1e-12 made positive) so
/// repeated runs are bit-identical. Throws std::invalid_argument when the
/// input is not symmetric within 1e-9.
EigenPair eig_sym(const Matrix& m);

/// Eigenvalues only, ascending.
Spectrum eig_values(const Matrix& m);

/// Pads both graphs to a common size, then sums |lambda_i(G) - lambda_i(H)|
/// over the ascending spectra of the chosen Laplacian.
double spectral_distance(const Graph& g, const Graph& h, LaplacianKind kind);

/// alpha * le + (1 - alpha) * lg; dimensions must match (pad the graphs first).
Matrix combine_laplacians(const Matrix& lg, const Matrix& le, InterpolationConfig cfg);

/// Element-wise alpha * se + (1 - alpha) * sg; lengths must match.
Spectrum interpolated_spectrum(const Spectrum& sg, const Spectrum& se, InterpolationConfig cfg);

/// lambda_2 - lambda_1; throws on spectra shorter than 2.
double spectral_gap(const Spectrum& s);

/// Frobenius norm of l1 - l2.
double frobenius_diff(const Matrix& l1, const Matrix& l2);

/// Interval [alpha*se_k + (1-alpha)*sg_1, alpha*se_k + (1-alpha)*sg_n]
/// containing the k-th eigenvalue of the combined operator; k is 1-based.
std::pair<double, double> weyl_interval(const Spectrum& se, const Spectrum& sg,
                                        InterpolationConfig cfg, std::size_t k);

/// One row of a verify_theorems run. Violations are data, not errors.
struct PairCheck {
    std::size_t pair_index = 0;
    std::size_t size = 0;
    bool connectivity_applicable = false;  // both members connected at equal size
    double lambda1_star = 0.0;
    double lambda2_star = 0.0;
    bool lambda1_ok = true;      // lambda_1(L*) < 1e-8
    bool lambda2_ok = true;      // lambda_2(L*) > 1e-8, when applicable
    bool weyl_ok = true;         // every eigenvalue inside its interval +- 1e-8
    double weyl_max_violation = 0.0;
    bool frobenius_ok = true;    // |measured - (1-alpha)*expected| < 1e-10
    double frobenius_error = 0.0;
    double gap_g = 0.0, gap_e = 0.0, gap_star = 0.0;
    bool gap_lower_ok = true;    // gap* >= min(gap_g, gap_e) - 1e-8 (provable)
    bool gap_upper_ok = true;    // gap* <= max(gap_g, gap_e) + 1e-8 (empirical)
};

struct TheoremReport {
    double alpha = 0.9;
    std::vector<PairCheck> pairs;

    std::size_t lambda1_violations() const;
    std::size_t lambda2_violations() const;
    std::size_t weyl_violations() const;
    std::size_t frobenius_violations() const;
    std::size_t gap_lower_violations() const;
    std::size_t gap_upper_violations() const;  // reported, never fatal

    /// True when every provable check passed (gap upper bound excluded).
    bool provable_ok() const;
};

/// Runs the spectral checks on each (G, H) pair with combinatorial Laplacians.
/// Pairs of unequal size are padded to the larger size first; the lambda_2
/// connectivity check only applies when both members are connected at equal
/// size (padding inserts isolated nodes and voids it).
TheoremReport verify_theorems(const std::vector<std::pair<Graph, Graph>>& pairs,
                              InterpolationConfig cfg);

std::string theorem_report_json(const TheoremReport& report);
void write_theorem_csv(const TheoremReport& report, std::ostream& out);

/// Weighted circulant graph: cycle edges of weight 1 plus chords at the given
/// circular distances. Entry (i, j) depends only on the circular distance.
Graph circulant_graph(std::size_t n, const std::vector<std::pair<std::size_t, double>>& chords);

/// Pair of same-size circulant graphs whose Laplacians commute AND whose
/// spectra are strictly monotone in the circulant frequency. Keeping the
/// total chord weight sum_s w_s * s^2 below 1 guarantees monotonicity, so
/// both spectra sort in the same eigenbasis order and the eigenvalues of any
/// convex combination equal the element-wise combination of the sorted
/// spectra exactly. A binary cycle-plus-chord pair does not have this
/// property in general.
std::pair<Graph, Graph> monotone_circulant_pair(std::uint64_t seed,
                                                std::size_t min_n = 6, std::size_t max_n = 20);

struct Lemma1Result {
    std::size_t pairs = 0;
    double max_error = 0.0;          // worst |eig(L*) - interpolated| over all pairs
    double max_commutator = 0.0;     // worst ||Lg Le - Le Lg||_max, should be ~0
    bool pass = false;               // max_error < 1e-8
};

/// Exactness check of the linear eigenvalue interpolation on commuting pairs.
Lemma1Result lemma1_commuting_check(std::size_t num_pairs, double alpha, std::uint64_t seed);

} // namespace gist
