#include "gist/spectral.hpp"

#include "gist/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace gist {

namespace {

double hypot2(double a, double b) {
    const double absa = std::abs(a);
    const double absb = std::abs(b);
    if (absa > absb) {
        const double r = absb / absa;
        return absa * std::sqrt(1.0 + r * r);
    }
    if (absb == 0.0) return 0.0;
    const double r = absa / absb;
    return absb * std::sqrt(1.0 + r * r);
}

// Householder reduction to tridiagonal form, accumulating the orthogonal
// transform in z. d receives the diagonal, e the sub-diagonal (e[0] unused).
void tridiagonalize(Matrix& z, std::vector<double>& d, std::vector<double>& e) {
    const std::size_t n = z.rows();
    for (std::size_t i = n - 1; i >= 1; --i) {
        const std::size_t l = i - 1;
        double h = 0.0;
        double scale = 0.0;
        if (l > 0) {
            for (std::size_t k = 0; k <= l; ++k) scale += std::abs(z(i, k));
            if (scale == 0.0) {
                e[i] = z(i, l);
            } else {
                for (std::size_t k = 0; k <= l; ++k) {
                    z(i, k) /= scale;
                    h += z(i, k) * z(i, k);
                }
                double f = z(i, l);
                double g = (f >= 0.0) ? -std::sqrt(h) : std::sqrt(h);
                e[i] = scale * g;
                h -= f * g;
                z(i, l) = f - g;
                f = 0.0;
                for (std::size_t j = 0; j <= l; ++j) {
                    z(j, i) = z(i, j) / h;
                    g = 0.0;
                    for (std::size_t k = 0; k <= j; ++k) g += z(j, k) * z(i, k);
                    for (std::size_t k = j + 1; k <= l; ++k) g += z(k, j) * z(i, k);
                    e[j] = g / h;
                    f += e[j] * z(i, j);
                }
                const double hh = f / (h + h);
                for (std::size_t j = 0; j <= l; ++j) {
                    f = z(i, j);
                    g = e[j] - hh * f;
                    e[j] = g;
                    for (std::size_t k = 0; k <= j; ++k)
                        z(j, k) -= f * e[k] + g * z(i, k);
                }
            }
        } else {
            e[i] = z(i, l);
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (d[i] != 0.0) {
            for (std::size_t j = 0; j < i; ++j) {
                double g = 0.0;
                for (std::size_t k = 0; k < i; ++k) g += z(i, k) * z(k, j);
                for (std::size_t k = 0; k < i; ++k) z(k, j) -= g * z(k, i);
            }
        }
        d[i] = z(i, i);
        z(i, i) = 1.0;
        for (std::size_t j = 0; j < i; ++j) {
            z(j, i) = 0.0;
            z(i, j) = 0.0;
        }
    }
}

// Implicit-shift QL on the tridiagonal (d, e), rotating the columns of z.
void ql_implicit(Matrix& z, std::vector<double>& d, std::vector<double>& e) {
    const std::size_t n = z.rows();
    for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        int iterations = 0;
        std::size_t m;
        do {
            for (m = l; m + 1 < n; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= 1e-300 || std::abs(e[m]) <= 2.3e-16 * dd) break;
            }
            if (m != l) {
                if (iterations++ == 64)
                    throw std::runtime_error("eig_sym: QL iteration failed to converge");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = hypot2(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
                double s = 1.0;
                double c = 1.0;
                double p = 0.0;
                bool underflow = false;
                for (std::size_t ii = m; ii-- > l;) {
                    double f = s * e[ii];
                    const double b = c * e[ii];
                    r = hypot2(f, g);
                    e[ii + 1] = r;
                    if (r == 0.0) {
                        d[ii + 1] -= p;
                        e[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[ii + 1] - p;
                    r = (d[ii] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[ii + 1] = g + p;
                    g = c * r - b;
                    for (std::size_t k = 0; k < n; ++k) {
                        f = z(k, ii + 1);
                        z(k, ii + 1) = s * z(k, ii) + c * f;
                        z(k, ii) = c * z(k, ii) - s * f;
                    }
                }
                if (underflow) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

} // namespace

EigenPair eig_sym(const Matrix& m) {
    const std::size_t n = m.rows();
    if (n == 0 || m.cols() != n) throw std::invalid_argument("eig_sym: matrix must be square");
    if (!m.is_symmetric(1e-9)) throw std::invalid_argument("eig_sym: matrix not symmetric");

    Matrix z = m;
    // Work on the exactly symmetric part so rounding asymmetries cannot leak in.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = 0.5 * (z(i, j) + z(j, i));
            z(i, j) = v;
            z(j, i) = v;
        }

    std::vector<double> d(n, 0.0), e(n, 0.0);
    if (n == 1) {
        d[0] = z(0, 0);
        z(0, 0) = 1.0;
    } else {
        tridiagonalize(z, d, e);
        ql_implicit(z, d, e);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });

    EigenPair out;
    out.values.values.resize(n);
    out.values.source_size = n;
    out.vectors = Matrix(n, n);
    for (std::size_t col = 0; col < n; ++col) {
        const std::size_t src = order[col];
        out.values.values[col] = d[src];
        // Deterministic sign: first entry with magnitude above 1e-12 is positive.
        double sign = 1.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (std::abs(z(k, src)) > 1e-12) {
                sign = z(k, src) > 0.0 ? 1.0 : -1.0;
                break;
            }
        }
        for (std::size_t k = 0; k < n; ++k) out.vectors(k, col) = sign * z(k, src);
    }
    return out;
}

Spectrum eig_values(const Matrix& m) {
    return eig_sym(m).values;
}

double spectral_distance(const Graph& g, const Graph& h, LaplacianKind kind) {
    const std::size_t m = std::max(g.num_nodes(), h.num_nodes());
    const Spectrum sg = eig_values(laplacian(pad_to(g, m), kind));
    const Spectrum sh = eig_values(laplacian(pad_to(h, m), kind));
    double dist = 0.0;
    for (std::size_t i = 0; i < m; ++i) dist += std::abs(sg[i] - sh[i]);
    return dist;
}

Matrix combine_laplacians(const Matrix& lg, const Matrix& le, InterpolationConfig cfg) {
    if (lg.rows() != le.rows() || lg.cols() != le.cols())
        throw std::invalid_argument("combine_laplacians: dimension mismatch, pad the graphs first");
    Matrix out(lg.rows(), lg.cols());
    for (std::size_t i = 0; i < lg.size(); ++i)
        out.data()[i] = cfg.alpha * le.data()[i] + (1.0 - cfg.alpha) * lg.data()[i];
    return out;
}

Spectrum interpolated_spectrum(const Spectrum& sg, const Spectrum& se, InterpolationConfig cfg) {
    if (sg.size() != se.size())
        throw std::invalid_argument("interpolated_spectrum: length mismatch, pad with zeros first");
    Spectrum out;
    out.source_size = sg.source_size;
    out.values.resize(sg.size());
    for (std::size_t i = 0; i < sg.size(); ++i)
        out.values[i] = cfg.alpha * se[i] + (1.0 - cfg.alpha) * sg[i];
    return out;
}

double spectral_gap(const Spectrum& s) {
    if (s.size() < 2) throw std::invalid_argument("spectral_gap: need at least two eigenvalues");
    return s[1] - s[0];
}

double frobenius_diff(const Matrix& l1, const Matrix& l2) {
    if (l1.rows() != l2.rows() || l1.cols() != l2.cols())
        throw std::invalid_argument("frobenius_diff: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < l1.size(); ++i) {
        const double d = l1.data()[i] - l2.data()[i];
        s += d * d;
    }
    return std::sqrt(s);
}

std::pair<double, double> weyl_interval(const Spectrum& se, const Spectrum& sg,
                                        InterpolationConfig cfg, std::size_t k) {
    if (se.size() != sg.size()) throw std::invalid_argument("weyl_interval: length mismatch");
    if (k < 1 || k > se.size()) throw std::out_of_range("weyl_interval: index out of range");
    const double lo = cfg.alpha * se[k - 1] + (1.0 - cfg.alpha) * sg[0];
    const double hi = cfg.alpha * se[k - 1] + (1.0 - cfg.alpha) * sg[sg.size() - 1];
    return {lo, hi};
}

TheoremReport verify_theorems(const std::vector<std::pair<Graph, Graph>>& pairs,
                              InterpolationConfig cfg) {
    constexpr double kTol = 1e-8;
    TheoremReport report;
    report.alpha = cfg.alpha;
    report.pairs.reserve(pairs.size());

    for (std::size_t idx = 0; idx < pairs.size(); ++idx) {
        const std::size_t m = std::max(pairs[idx].first.num_nodes(), pairs[idx].second.num_nodes());
        const Graph g = pad_to(pairs[idx].first, m);
        const Graph ge = pad_to(pairs[idx].second, m);

        PairCheck row;
        row.pair_index = idx;
        row.size = m;
        row.connectivity_applicable = is_connected(g) && is_connected(ge);

        const Matrix lg = laplacian(g, LaplacianKind::Combinatorial);
        const Matrix le = laplacian(ge, LaplacianKind::Combinatorial);
        const Matrix lstar = combine_laplacians(lg, le, cfg);

        const Spectrum sg = eig_values(lg);
        const Spectrum se = eig_values(le);
        const Spectrum sstar = eig_values(lstar);

        row.lambda1_star = sstar[0];
        row.lambda2_star = m >= 2 ? sstar[1] : 0.0;
        row.lambda1_ok = std::abs(row.lambda1_star) < kTol;
        row.lambda2_ok = !row.connectivity_applicable || row.lambda2_star > kTol;

        row.weyl_ok = true;
        for (std::size_t k = 1; k <= m; ++k) {
            const auto [lo, hi] = weyl_interval(se, sg, cfg, k);
            const double below = lo - sstar[k - 1];
            const double above = sstar[k - 1] - hi;
            const double violation = std::max(below, above);
            row.weyl_max_violation = std::max(row.weyl_max_violation, violation);
            if (violation > kTol) row.weyl_ok = false;
        }

        const double measured = frobenius_diff(le, lstar);
        const double expected = (1.0 - cfg.alpha) * frobenius_diff(le, lg);
        row.frobenius_error = std::abs(measured - expected);
        row.frobenius_ok = row.frobenius_error < 1e-10;

        if (m >= 2) {
            row.gap_g = spectral_gap(sg);
            row.gap_e = spectral_gap(se);
            row.gap_star = spectral_gap(sstar);
            row.gap_lower_ok = row.gap_star >= std::min(row.gap_g, row.gap_e) - kTol;
            row.gap_upper_ok = row.gap_star <= std::max(row.gap_g, row.gap_e) + kTol;
        }

        report.pairs.push_back(row);
    }
    return report;
}

namespace {
template <typename Pred>
std::size_t count_pairs(const TheoremReport& r, Pred pred) {
    return static_cast<std::size_t>(std::count_if(r.pairs.begin(), r.pairs.end(), pred));
}
} // namespace

std::size_t TheoremReport::lambda1_violations() const {
    return count_pairs(*this, [](const PairCheck& p) { return !p.lambda1_ok; });
}
std::size_t TheoremReport::lambda2_violations() const {
    return count_pairs(*this, [](const PairCheck& p) { return !p.lambda2_ok; });
}
std::size_t TheoremReport::weyl_violations() const {
    return count_pairs(*this, [](const PairCheck& p) { return !p.weyl_ok; });
}
std::size_t TheoremReport::frobenius_violations() const {
    return count_pairs(*this, [](const PairCheck& p) { return !p.frobenius_ok; });
}
std::size_t TheoremReport::gap_lower_violations() const {
    return count_pairs(*this, [](const PairCheck& p) { return !p.gap_lower_ok; });
}
std::size_t TheoremReport::gap_upper_violations() const {
    return count_pairs(*this, [](const PairCheck& p) { return !p.gap_upper_ok; });
}

bool TheoremReport::provable_ok() const {
    return lambda1_violations() == 0 && lambda2_violations() == 0 && weyl_violations() == 0 &&
           frobenius_violations() == 0 && gap_lower_violations() == 0;
}

std::string theorem_report_json(const TheoremReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const PairCheck& p : report.pairs) {
        rows.push_back({{"pair", p.pair_index},
                        {"size", p.size},
                        {"connectivity_applicable", p.connectivity_applicable},
                        {"lambda1_star", p.lambda1_star},
                        {"lambda2_star", p.lambda2_star},
                        {"lambda1_ok", p.lambda1_ok},
                        {"lambda2_ok", p.lambda2_ok},
                        {"weyl_ok", p.weyl_ok},
                        {"weyl_max_violation", p.weyl_max_violation},
                        {"frobenius_ok", p.frobenius_ok},
                        {"frobenius_error", p.frobenius_error},
                        {"gap_g", p.gap_g},
                        {"gap_e", p.gap_e},
                        {"gap_star", p.gap_star},
                        {"gap_lower_ok", p.gap_lower_ok},
                        {"gap_upper_ok", p.gap_upper_ok}});
    }
    nlohmann::json j{{"alpha", report.alpha},
                     {"num_pairs", report.pairs.size()},
                     {"lambda1_violations", report.lambda1_violations()},
                     {"lambda2_violations", report.lambda2_violations()},
                     {"weyl_violations", report.weyl_violations()},
                     {"frobenius_violations", report.frobenius_violations()},
                     {"gap_lower_violations", report.gap_lower_violations()},
                     {"gap_upper_violations", report.gap_upper_violations()},
                     {"provable_ok", report.provable_ok()},
                     {"pairs", rows}};
    return j.dump(2);
}

void write_theorem_csv(const TheoremReport& report, std::ostream& out) {
    out << "pair,size,connectivity_applicable,lambda1_star,lambda2_star,lambda1_ok,lambda2_ok,"
           "weyl_ok,weyl_max_violation,frobenius_ok,frobenius_error,gap_g,gap_e,gap_star,"
           "gap_lower_ok,gap_upper_ok\n";
    char buf[512];
    for (const PairCheck& p : report.pairs) {
        std::snprintf(buf, sizeof(buf),
                      "%zu,%zu,%d,%.17g,%.17g,%d,%d,%d,%.17g,%d,%.17g,%.17g,%.17g,%.17g,%d,%d\n",
                      p.pair_index, p.size, p.connectivity_applicable ? 1 : 0, p.lambda1_star,
                      p.lambda2_star, p.lambda1_ok ? 1 : 0, p.lambda2_ok ? 1 : 0, p.weyl_ok ? 1 : 0,
                      p.weyl_max_violation, p.frobenius_ok ? 1 : 0, p.frobenius_error, p.gap_g,
                      p.gap_e, p.gap_star, p.gap_lower_ok ? 1 : 0, p.gap_upper_ok ? 1 : 0);
        out << buf;
    }
}

Graph circulant_graph(std::size_t n, const std::vector<std::pair<std::size_t, double>>& chords) {
    if (n < 3) throw std::invalid_argument("circulant_graph: need at least 3 nodes");
    Graph g;
    g.adjacency = Matrix(n, n);
    g.node_features = Matrix(n, 1);
    for (auto [dist, weight] : chords) {
        if (dist == 0 || dist >= n) throw std::invalid_argument("circulant_graph: bad chord distance");
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = (i + dist) % n;
            g.adjacency(i, j) = weight;
            g.adjacency(j, i) = weight;
        }
    }
    for (std::size_t i = 0; i < n; ++i) g.node_features(i, 0) = g.adjacency.row_sums()[i];
    return g;
}

namespace {
Graph random_monotone_circulant(std::size_t n, Rng& rng) {
    std::vector<std::pair<std::size_t, double>> chords{{1, 1.0}};
    const std::size_t max_dist = std::min<std::size_t>(5, (n - 1) / 2);
    std::vector<std::size_t> candidates;
    for (std::size_t s = 2; s <= max_dist; ++s) candidates.push_back(s);
    rng.shuffle(candidates);
    const std::size_t num_chords = candidates.empty() ? 0 : 1 + rng.uniform_int(candidates.size());
    // sum_s w_s * s^2 stays below 1, which keeps the circulant spectrum
    // strictly monotone in frequency; see monotone_circulant_pair docs.
    double budget = 0.8;
    for (std::size_t c = 0; c < num_chords; ++c) {
        const std::size_t s = candidates[c];
        const double w = (budget / static_cast<double>(num_chords)) /
                         static_cast<double>(s * s) * (0.5 + 0.5 * rng.uniform());
        chords.emplace_back(s, w);
    }
    return circulant_graph(n, chords);
}
} // namespace

std::pair<Graph, Graph> monotone_circulant_pair(std::uint64_t seed, std::size_t min_n,
                                                std::size_t max_n) {
    Rng rng(seed);
    const std::size_t n = min_n + rng.uniform_int(max_n - min_n + 1);
    Graph a = random_monotone_circulant(n, rng);
    Graph b = random_monotone_circulant(n, rng);
    return {std::move(a), std::move(b)};
}

Lemma1Result lemma1_commuting_check(std::size_t num_pairs, double alpha, std::uint64_t seed) {
    Lemma1Result result;
    result.pairs = num_pairs;
    InterpolationConfig cfg{alpha};
    for (std::size_t p = 0; p < num_pairs; ++p) {
        auto [g, ge] = monotone_circulant_pair(seed + p);
        const Matrix lg = laplacian(g, LaplacianKind::Combinatorial);
        const Matrix le = laplacian(ge, LaplacianKind::Combinatorial);
        result.max_commutator =
            std::max(result.max_commutator, max_abs_diff(matmul(lg, le), matmul(le, lg)));
        const Spectrum direct = eig_values(combine_laplacians(lg, le, cfg));
        const Spectrum interp = interpolated_spectrum(eig_values(lg), eig_values(le), cfg);
        for (std::size_t i = 0; i < direct.size(); ++i)
            result.max_error = std::max(result.max_error, std::abs(direct[i] - interp[i]));
    }
    result.pass = result.max_error < 1e-8;
    return result;
}

} // namespace gist
