#pragma once

#include "gist/explainer.hpp"
#include "gist/graph.hpp"
#include "gist/oracle.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace gist {

/// 1 iff the oracle classifies gstar differently from g (two oracle calls).
int validity(const Graph& g, const Graph& gstar, const Oracle& oracle);

/// chi(G) - 1[Phi(G*) == y] with chi(G) = 1[Phi(G) == y]; values in {-1, 0, 1}.
int fidelity(const Graph& g, int y, const Graph& gstar, const Oracle& oracle);

/// Graph edit distance under positional node identity: |n - n'| node edits,
/// plus the full symmetric difference of the undirected edge sets (edges
/// incident to inserted/deleted nodes included), plus one unit per common
/// node whose feature row moved by more than 1e-9 in L1. With positional
/// identity this symmetric-difference cost is the optimal edit path, so no
/// matching search is run.
double ged(const Graph& a, const Graph& b);

/// ged(G, G*) / (|V(G)| + |E(G)|); throws on an empty input graph.
double sparsity(const Graph& g, const Graph& gstar);

struct InstanceMetrics {
    int instance = 0;
    int validity = 0;        // {0, 1}
    int fidelity = 0;        // {-1, 0, 1}
    double sparsity = 0.0;
    double ged = 0.0;
    std::uint64_t oracle_calls = 0;  // calls consumed by the explainer itself
    double runtime_ms = 0.0;
};

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;
};

struct MetricReport {
    int fold_id = 0;
    std::string explainer;
    std::vector<InstanceMetrics> rows;
    Aggregate validity, fidelity, sparsity, ged, oracle_calls, runtime_ms;
    double oracle_accuracy = 0.0;

    void finalize();  // fills the aggregates from the rows
};

struct CvConfig {
    int folds = 5;
    OracleConfig oracle;
    GistConfig gist;
    double irand_p = 0.01;
    int irand_t = 3;
    std::uint64_t seed = 0;
};

/// Seeded fold partition: fold i holds the test indices of fold i. The folds
/// are disjoint and cover 0..n-1.
std::vector<std::vector<std::size_t>> cv_partition(std::size_t n, int folds, std::uint64_t seed);

/// Per fold: a disjoint test chunk (the folds partition the dataset), 10% of
/// the remaining training split held out as validation for oracle early
/// stopping, one oracle shared by every explainer in the fold, then GIST and
/// iRand evaluated on the fold's test set. Fully seeded and reproducible.
/// Returns two reports per fold (explainer "gist" and "irand", in that order).
std::vector<MetricReport> run_cv(const Dataset& dataset, const CvConfig& cfg);

/// One CSV per fold: a '#'-prefixed metadata block, then one row per explainer
/// per test instance. runtime_ms deliberately stays out of the CSV so reruns
/// with the same seed are byte-identical.
void write_fold_csv(const std::vector<MetricReport>& fold_reports, const std::string& meta,
                    std::ostream& out);

/// Aggregate JSON whose per-explainer keys mirror the standard report columns
/// (GED, Oracle Calls, Validity, Sparsity, Fidelity).
std::string aggregate_json(const std::vector<MetricReport>& reports, const std::string& meta);

/// Spearman rank correlation with average ranks on ties.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

/// Seeded single train/test split (train gets the complement of test_fraction).
struct Split {
    Dataset train;
    Dataset test;
};
Split split_dataset(const Dataset& dataset, double test_fraction, std::uint64_t seed);

struct AlphaSweepRow {
    double alpha = 0.0;
    double mean_ged_input_result = 0.0;     // GED(G, G*)
    double mean_ged_result_overshoot = 0.0; // GED(G*, G-eps)
    double mean_validity = 0.0;
};

/// One 90:10 split, one oracle, one GIST training per alpha, all seeded from
/// cfg.seed. Rows come back in the order of the requested alphas.
std::vector<AlphaSweepRow> sweep_alpha(const Dataset& dataset, const std::vector<double>& alphas,
                                       const CvConfig& cfg);

struct SpectraPair {
    std::size_t pair_index = 0;
    std::vector<double> lambda_g, lambda_eps, lambda_star, lambda_interp;  // common padded size
    double gap_g = 0.0, gap_eps = 0.0, gap_star = 0.0;  // per-graph spectra, unpadded
    double lambda1_star = 0.0;
    double frob_measured = 0.0;  // ||L(G_eps) - L(G*)||_F after padding
    double frob_expected = 0.0;  // (1 - alpha) ||L(G_eps) - L(G)||_F
};

/// Trains on a 90:10 split and explains the first k test instances, reporting
/// each pair's spectra against the optimal element-wise interpolation.
std::vector<SpectraPair> spectra_report(const Dataset& dataset, const CvConfig& cfg,
                                        std::size_t k_pairs);

} // namespace gist
