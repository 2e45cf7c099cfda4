#include "gist/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace gist {

int validity(const Graph& g, const Graph& gstar, const Oracle& oracle) {
    return oracle.predict(g) != oracle.predict(gstar) ? 1 : 0;
}

int fidelity(const Graph& g, int y, const Graph& gstar, const Oracle& oracle) {
    const int chi = oracle.predict(g) == y ? 1 : 0;
    const int star_hits = oracle.predict(gstar) == y ? 1 : 0;
    return chi - star_hits;
}

double ged(const Graph& a, const Graph& b) {
    const std::size_t na = a.num_nodes();
    const std::size_t nb = b.num_nodes();
    double cost = static_cast<double>(na > nb ? na - nb : nb - na);

    auto ea = a.edge_list();
    auto eb = b.edge_list();
    std::vector<std::pair<std::size_t, std::size_t>> sym;
    std::set_symmetric_difference(ea.begin(), ea.end(), eb.begin(), eb.end(),
                                  std::back_inserter(sym));
    cost += static_cast<double>(sym.size());

    const std::size_t common = std::min(na, nb);
    const std::size_t fa = a.feature_dim();
    const std::size_t fb = b.feature_dim();
    for (std::size_t i = 0; i < common; ++i) {
        double l1 = 0.0;
        for (std::size_t j = 0; j < std::max(fa, fb); ++j) {
            const double va = j < fa ? a.node_features(i, j) : 0.0;
            const double vb = j < fb ? b.node_features(i, j) : 0.0;
            l1 += std::abs(va - vb);
        }
        if (l1 > 1e-9) cost += 1.0;
    }
    return cost;
}

double sparsity(const Graph& g, const Graph& gstar) {
    const double denom = static_cast<double>(g.num_nodes() + g.num_edges());
    if (denom == 0.0) throw std::invalid_argument("sparsity: empty input graph");
    return ged(g, gstar) / denom;
}

namespace {

Aggregate aggregate_of(const std::vector<double>& xs) {
    Aggregate a;
    if (xs.empty()) return a;
    a.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - a.mean) * (x - a.mean);
    a.stddev = std::sqrt(var / static_cast<double>(xs.size()));
    return a;
}

template <typename Get>
Aggregate aggregate_rows(const std::vector<InstanceMetrics>& rows, Get get) {
    std::vector<double> xs;
    xs.reserve(rows.size());
    for (const InstanceMetrics& r : rows) xs.push_back(get(r));
    return aggregate_of(xs);
}

} // namespace

void MetricReport::finalize() {
    validity = aggregate_rows(rows, [](const InstanceMetrics& r) { return double(r.validity); });
    fidelity = aggregate_rows(rows, [](const InstanceMetrics& r) { return double(r.fidelity); });
    sparsity = aggregate_rows(rows, [](const InstanceMetrics& r) { return r.sparsity; });
    ged = aggregate_rows(rows, [](const InstanceMetrics& r) { return r.ged; });
    oracle_calls =
        aggregate_rows(rows, [](const InstanceMetrics& r) { return double(r.oracle_calls); });
    runtime_ms = aggregate_rows(rows, [](const InstanceMetrics& r) { return r.runtime_ms; });
}

namespace {

std::uint64_t mix_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = root ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xbf58476d1ce4e5b9ULL);
    x ^= x >> 31;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 29;
    return x;
}

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Dataset out;
    out.name = ds.name;
    out.num_classes = ds.num_classes;
    out.graphs.reserve(idx.size());
    for (std::size_t i : idx) out.graphs.push_back(ds.graphs[i]);
    return out;
}

} // namespace

std::vector<std::vector<std::size_t>> cv_partition(std::size_t n, int folds, std::uint64_t seed) {
    if (folds < 2) throw std::invalid_argument("cv_partition: need at least 2 folds");
    Rng root(seed);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    root.shuffle(perm);
    std::vector<std::vector<std::size_t>> chunks(static_cast<std::size_t>(folds));
    for (std::size_t i = 0; i < n; ++i)
        chunks[i % static_cast<std::size_t>(folds)].push_back(perm[i]);
    return chunks;
}

std::vector<MetricReport> run_cv(const Dataset& dataset, const CvConfig& cfg) {
    if (cfg.folds < 2) throw std::invalid_argument("run_cv: need at least 2 folds");
    const std::size_t n = dataset.graphs.size();
    if (n < static_cast<std::size_t>(cfg.folds) * 2)
        throw std::invalid_argument("run_cv: dataset too small for the requested folds");

    const auto chunks = cv_partition(n, cfg.folds, cfg.seed);

    std::vector<MetricReport> reports;
    for (int fold = 0; fold < cfg.folds; ++fold) {
        const std::vector<std::size_t>& test_idx = chunks[static_cast<std::size_t>(fold)];
        std::vector<std::size_t> rest_idx;
        for (int other = 0; other < cfg.folds; ++other)
            if (other != fold)
                rest_idx.insert(rest_idx.end(), chunks[static_cast<std::size_t>(other)].begin(),
                                chunks[static_cast<std::size_t>(other)].end());

        // 10% of the training split becomes oracle validation.
        Rng fold_rng(mix_seed(cfg.seed, 17, static_cast<std::uint64_t>(fold)));
        fold_rng.shuffle(rest_idx);
        const std::size_t val_count = std::max<std::size_t>(1, rest_idx.size() / 10);
        std::vector<std::size_t> val_idx(rest_idx.end() - static_cast<std::ptrdiff_t>(val_count),
                                         rest_idx.end());
        std::vector<std::size_t> train_idx(rest_idx.begin(),
                                           rest_idx.end() - static_cast<std::ptrdiff_t>(val_count));

        const Dataset train = subset(dataset, train_idx);
        const Dataset val = subset(dataset, val_idx);
        const Dataset test = subset(dataset, test_idx);

        OracleConfig ocfg = cfg.oracle;
        ocfg.seed = mix_seed(cfg.seed, 29, static_cast<std::uint64_t>(fold));
        const Oracle oracle = train_oracle(train, val, ocfg);
        const double acc = oracle_accuracy(oracle, test);

        GistConfig gcfg = cfg.gist;
        gcfg.seed = mix_seed(cfg.seed, 43, static_cast<std::uint64_t>(fold));
        const nn::GistModel model = train_gist(train, oracle, gcfg);

        MetricReport gist_report;
        gist_report.fold_id = fold;
        gist_report.explainer = "gist";
        gist_report.oracle_accuracy = acc;

        MetricReport irand_report;
        irand_report.fold_id = fold;
        irand_report.explainer = "irand";
        irand_report.oracle_accuracy = acc;

        for (std::size_t t = 0; t < test.graphs.size(); ++t) {
            const Graph& g = test.graphs[t];

            GistConfig instance_cfg = gcfg;
            instance_cfg.seed = mix_seed(gcfg.seed, 7, t);
            auto t0 = std::chrono::steady_clock::now();
            const Counterfactual cf = explain(model, g, train, oracle, instance_cfg);
            auto t1 = std::chrono::steady_clock::now();

            InstanceMetrics row;
            row.instance = static_cast<int>(t);
            row.validity = validity(g, cf.result, oracle);
            row.fidelity = g.label ? fidelity(g, *g.label, cf.result, oracle) : 0;
            row.ged = ged(g, cf.result);
            row.sparsity = sparsity(g, cf.result);
            row.oracle_calls = cf.oracle_calls_used;
            row.runtime_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
            gist_report.rows.push_back(row);

            Rng irand_rng(mix_seed(cfg.seed, 61, mix_seed(0, fold, t)));
            t0 = std::chrono::steady_clock::now();
            const Counterfactual icf = irand_explain(g, oracle, cfg.irand_p, cfg.irand_t, irand_rng);
            t1 = std::chrono::steady_clock::now();

            InstanceMetrics irow;
            irow.instance = static_cast<int>(t);
            irow.validity = validity(g, icf.result, oracle);
            irow.fidelity = g.label ? fidelity(g, *g.label, icf.result, oracle) : 0;
            irow.ged = ged(g, icf.result);
            irow.sparsity = sparsity(g, icf.result);
            irow.oracle_calls = icf.oracle_calls_used;
            irow.runtime_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
            irand_report.rows.push_back(irow);
        }

        gist_report.finalize();
        irand_report.finalize();
        reports.push_back(std::move(gist_report));
        reports.push_back(std::move(irand_report));
    }
    return reports;
}

void write_fold_csv(const std::vector<MetricReport>& fold_reports, const std::string& meta,
                    std::ostream& out) {
    if (!meta.empty()) out << "# " << meta << "\n";
    out << "explainer,instance,validity,fidelity,sparsity,ged,oracle_calls\n";
    char buf[256];
    for (const MetricReport& report : fold_reports) {
        for (const InstanceMetrics& r : report.rows) {
            std::snprintf(buf, sizeof(buf), "%s,%d,%d,%d,%.17g,%.17g,%llu\n",
                          report.explainer.c_str(), r.instance, r.validity, r.fidelity, r.sparsity,
                          r.ged, static_cast<unsigned long long>(r.oracle_calls));
            out << buf;
        }
    }
}

std::string aggregate_json(const std::vector<MetricReport>& reports, const std::string& meta) {
    auto agg = [](const Aggregate& a) {
        return nlohmann::json{{"mean", a.mean}, {"std", a.stddev}};
    };

    // Merge per-explainer rows across folds.
    std::vector<std::string> names;
    for (const MetricReport& r : reports)
        if (std::find(names.begin(), names.end(), r.explainer) == names.end())
            names.push_back(r.explainer);

    nlohmann::json explainers;
    for (const std::string& name : names) {
        MetricReport merged;
        merged.explainer = name;
        for (const MetricReport& r : reports)
            if (r.explainer == name)
                merged.rows.insert(merged.rows.end(), r.rows.begin(), r.rows.end());
        merged.finalize();
        explainers[name] = {{"GED", agg(merged.ged)},
                            {"Oracle Calls", agg(merged.oracle_calls)},
                            {"Validity", agg(merged.validity)},
                            {"Sparsity", agg(merged.sparsity)},
                            {"Fidelity", agg(merged.fidelity)},
                            {"Runtime (ms)", agg(merged.runtime_ms)}};
    }

    std::vector<double> accs;
    for (const MetricReport& r : reports)
        if (r.explainer == names.front()) accs.push_back(r.oracle_accuracy);

    nlohmann::json j{{"meta", meta},
                     {"folds", accs.size()},
                     {"oracle_accuracy", agg(aggregate_of(accs))},
                     {"explainers", explainers}};
    return j.dump(2);
}

Split split_dataset(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
    if (test_fraction <= 0.0 || test_fraction >= 1.0)
        throw std::invalid_argument("split_dataset: test_fraction outside (0, 1)");
    const std::size_t n = dataset.graphs.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(mix_seed(seed, 3, 11));
    rng.shuffle(perm);
    const std::size_t test_count =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(test_fraction * double(n))));
    Split split;
    split.test = subset(dataset, {perm.begin(), perm.begin() + test_count});
    split.train = subset(dataset, {perm.begin() + test_count, perm.end()});
    return split;
}

std::vector<AlphaSweepRow> sweep_alpha(const Dataset& dataset, const std::vector<double>& alphas,
                                       const CvConfig& cfg) {
    const Split split = split_dataset(dataset, 0.1, cfg.seed);
    const Split oracle_split = split_dataset(split.train, 0.1, mix_seed(cfg.seed, 5, 1));

    OracleConfig ocfg = cfg.oracle;
    ocfg.seed = mix_seed(cfg.seed, 29, 0);
    const Oracle oracle = train_oracle(oracle_split.train, oracle_split.test, ocfg);

    std::vector<AlphaSweepRow> rows;
    for (std::size_t a = 0; a < alphas.size(); ++a) {
        GistConfig gcfg = cfg.gist;
        gcfg.alpha = alphas[a];
        gcfg.seed = mix_seed(cfg.seed, 43, 0);  // same stream for every alpha
        const nn::GistModel model = train_gist(split.train, oracle, gcfg);

        AlphaSweepRow row;
        row.alpha = alphas[a];
        double ged_gr = 0.0, ged_re = 0.0, valid = 0.0;
        for (std::size_t t = 0; t < split.test.graphs.size(); ++t) {
            GistConfig icfg = gcfg;
            icfg.seed = mix_seed(gcfg.seed, 7, t);
            const Counterfactual cf = explain(model, split.test.graphs[t], split.train, oracle, icfg);
            ged_gr += ged(cf.input, cf.result);
            ged_re += ged(cf.result, cf.overshoot);
            valid += cf.valid ? 1.0 : 0.0;
        }
        const double count = static_cast<double>(split.test.graphs.size());
        row.mean_ged_input_result = ged_gr / count;
        row.mean_ged_result_overshoot = ged_re / count;
        row.mean_validity = valid / count;
        rows.push_back(row);
    }
    return rows;
}

std::vector<SpectraPair> spectra_report(const Dataset& dataset, const CvConfig& cfg,
                                        std::size_t k_pairs) {
    const Split split = split_dataset(dataset, 0.1, cfg.seed);
    const Split oracle_split = split_dataset(split.train, 0.1, mix_seed(cfg.seed, 5, 1));

    OracleConfig ocfg = cfg.oracle;
    ocfg.seed = mix_seed(cfg.seed, 29, 0);
    const Oracle oracle = train_oracle(oracle_split.train, oracle_split.test, ocfg);

    GistConfig gcfg = cfg.gist;
    gcfg.seed = mix_seed(cfg.seed, 43, 0);
    const nn::GistModel model = train_gist(split.train, oracle, gcfg);

    const LaplacianKind kind = gcfg.spectral_kind;
    std::vector<SpectraPair> pairs;
    const std::size_t count = std::min(k_pairs, split.test.graphs.size());
    for (std::size_t t = 0; t < count; ++t) {
        GistConfig icfg = gcfg;
        icfg.seed = mix_seed(gcfg.seed, 7, t);
        const Counterfactual cf = explain(model, split.test.graphs[t], split.train, oracle, icfg);

        SpectraPair row;
        row.pair_index = t;
        const std::size_t m = std::max({cf.input.num_nodes(), cf.overshoot.num_nodes(),
                                        cf.result.num_nodes()});
        const Matrix lg = laplacian(pad_to(cf.input, m), kind);
        const Matrix le = laplacian(pad_to(cf.overshoot, m), kind);
        const Matrix ls = laplacian(pad_to(cf.result, m), kind);
        const Spectrum sg = eig_values(lg);
        const Spectrum se = eig_values(le);
        const Spectrum ss = eig_values(ls);
        row.lambda_g = sg.values;
        row.lambda_eps = se.values;
        row.lambda_star = ss.values;
        row.lambda_interp = interpolated_spectrum(sg, se, {gcfg.alpha}).values;

        row.gap_g = spectral_gap(eig_values(laplacian(cf.input, kind)));
        row.gap_eps = spectral_gap(eig_values(laplacian(cf.overshoot, kind)));
        row.gap_star = spectral_gap(eig_values(laplacian(cf.result, kind)));
        row.lambda1_star = eig_values(laplacian(cf.result, kind))[0];

        row.frob_measured = frobenius_diff(le, ls);
        row.frob_expected = (1.0 - gcfg.alpha) * frobenius_diff(le, lg);
        pairs.push_back(std::move(row));
    }
    return pairs;
}

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("spearman: need two same-length samples");
    auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
            const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const std::vector<double> rx = ranks(xs);
    const std::vector<double> ry = ranks(ys);
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double cov = 0.0, vx = 0.0, vy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        cov += (rx[i] - mx) * (ry[i] - my);
        vx += (rx[i] - mx) * (rx[i] - mx);
        vy += (ry[i] - my) * (ry[i] - my);
    }
    if (vx == 0.0 || vy == 0.0) return 0.0;
    return cov / std::sqrt(vx * vy);
}

} // namespace gist
