// bdr: batch front end for bivariate distribution regression.
//
// Exit status: 0 success, 2 configuration error, 3 data error, 4 estimation error.

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "bdr/bdr.hpp"

namespace fs = std::filesystem;
using bdr::io::format_number;
using nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kConfig = 2, kData = 3, kEstimation = 4 };

struct RunConfig {
    std::string input;
    std::string y_col = "y";
    std::string w_col = "w";
    std::string group_col;
    std::vector<std::string> covariates;
    char delimiter = ',';
    std::size_t grid_points = 10;
    double trim_lower = 0.02;
    double trim_upper = 0.98;
    int tail_min_obs = 30;
    std::vector<std::string> delta_covariates;
    std::size_t reps = 0;
    std::string scheme = "exponential";
    std::uint64_t seed = 1;
    double level = 0.95;
    std::string out_dir = "bdr_out";
    bool strict = false;
    unsigned threads = 1;
};

/// Output files written so far; removed on a strict-mode failure.
struct Outputs {
    fs::path dir;
    std::vector<fs::path> written;

    fs::path path(const std::string& name) {
        fs::create_directories(dir);
        written.push_back(dir / name);
        return written.back();
    }
    void save(const bdr::io::Table& t, const std::string& name) { t.save(path(name).string()); }
    void remove_all() {
        std::error_code ec;
        for (const auto& p : written) fs::remove(p, ec);
    }
};

struct Data {
    bdr::io::IngestResult ingest;
    std::vector<bdr::Sample> samples;  // one per group
    bdr::GridSpec grid;
    bdr::BdrConfig fit_config;
};

struct Fitted {
    std::vector<bdr::BdrFit> fits;
    std::vector<bdr::BootstrapEnsemble> boot;  // empty without bootstrap
    std::vector<std::size_t> usable;           // replicates valid for every group
};

// ---------------------------------------------------------------------------

void add_data_options(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("-i,--input", cfg.input, "Delimited input file with a header row")->required();
    sub->add_option("--y", cfg.y_col, "Column of the first outcome")->capture_default_str();
    sub->add_option("--w", cfg.w_col, "Column of the second outcome")->capture_default_str();
    sub->add_option("--group", cfg.group_col, "Binary (0/1) group column");
    sub->add_option("--covariates", cfg.covariates, "Covariate columns (intercept is added)")
        ->delimiter(',');
    sub->add_option("--delimiter", cfg.delimiter, "Field delimiter")->capture_default_str();
    sub->add_option("--grid-points", cfg.grid_points, "Grid points per outcome")
        ->capture_default_str()
        ->check(CLI::Range(3, 10000));
    sub->add_option("--trim-lower", cfg.trim_lower, "Lowest grid quantile level")->capture_default_str();
    sub->add_option("--trim-upper", cfg.trim_upper, "Highest grid quantile level")->capture_default_str();
    sub->add_option("--tail-min-obs", cfg.tail_min_obs, "Observations required around each tail r0")
        ->capture_default_str();
    sub->add_option("--delta-covariates", cfg.delta_covariates,
                    "Covariates entering the dependence index ('const' for the intercept; default all)")
        ->delimiter(',');
    sub->add_option("-o,--out", cfg.out_dir, "Output directory")->capture_default_str();
    sub->add_flag("--strict", cfg.strict, "Fail on the first non-converged grid pair and remove outputs");
    sub->add_option("--threads", cfg.threads, "Worker threads")
        ->envname("BDR_THREADS")
        ->capture_default_str()
        ->check(CLI::Range(1u, 1024u));
}

void add_bootstrap_options(CLI::App* sub, RunConfig& cfg, bool required) {
    auto* reps = sub->add_option("-B,--reps", cfg.reps, "Bootstrap replicates");
    if (required) reps->required();
    sub->add_option("--scheme", cfg.scheme, "Bootstrap weights")
        ->check(CLI::IsMember({"exponential", "multinomial"}))
        ->capture_default_str();
    sub->add_option("--seed", cfg.seed, "Bootstrap seed")->capture_default_str();
    sub->add_option("--level", cfg.level, "Percentile interval level")
        ->capture_default_str()
        ->check(CLI::Range(0.5, 0.9999));
}

Data load(const RunConfig& cfg, bool need_groups) {
    bdr::io::ColumnRoles roles;
    roles.y = cfg.y_col;
    roles.w = cfg.w_col;
    roles.group = cfg.group_col;
    roles.covariates = cfg.covariates;
    roles.delimiter = cfg.delimiter;
    if (need_groups && roles.group.empty()) throw bdr::ConfigError("this command needs --group");
    Data d;
    d.ingest = bdr::io::ingest(cfg.input, roles);
    for (auto& s : d.ingest.groups) {
        d.samples.push_back(bdr::validate(std::move(s)));
    }
    d.ingest.groups.clear();
    d.grid = bdr::build_grid(d.ingest.pooled, cfg.grid_points, {cfg.trim_lower, cfg.trim_upper},
                             cfg.tail_min_obs);
    d.fit_config.strict = cfg.strict;
    d.fit_config.threads = cfg.threads;
    const auto& names = d.ingest.pooled.covariate_names;
    for (const auto& c : cfg.delta_covariates) {
        const auto it = std::find(names.begin(), names.end(), c);
        if (it == names.end()) throw bdr::ConfigError("unknown delta covariate '" + c + "'");
        d.fit_config.delta_columns.push_back(static_cast<int>(it - names.begin()));
    }
    return d;
}

bdr::WeightScheme weight_scheme(const RunConfig& cfg) {
    bdr::WeightScheme s;
    s.kind = cfg.scheme == "multinomial" ? bdr::WeightKind::multinomial : bdr::WeightKind::exponential;
    s.seed = cfg.seed;
    return s;
}

Fitted fit_all(const RunConfig& cfg, const Data& d) {
    Fitted f;
    for (const auto& s : d.samples) f.fits.push_back(bdr::fit_bdr(s, d.grid, d.fit_config));
    if (cfg.reps == 0) return f;
    const auto scheme = weight_scheme(cfg);
    for (std::size_t g = 0; g < d.samples.size(); ++g) {
        f.boot.push_back(bdr::bootstrap_fit(d.samples[g], d.grid, d.fit_config, f.fits[g], cfg.reps,
                                            scheme, g, cfg.threads));
    }
    for (std::size_t r = 0; r < cfg.reps; ++r) {
        const bool ok = std::all_of(f.boot.begin(), f.boot.end(),
                                    [r](const auto& e) { return e.draws[r].has_value(); });
        if (ok) f.usable.push_back(r);
    }
    return f;
}

std::string group_label(const Data& d, std::size_t g) {
    return d.samples.size() == 1 && d.ingest.pooled.group.empty() ? "all" : std::to_string(g);
}

std::vector<std::string> coef_header(std::vector<std::string> lead, const std::vector<std::string>& names) {
    for (const auto& n : names) lead.push_back(n);
    return lead;
}

std::vector<std::string> delta_names(const Data& d) {
    const auto& names = d.ingest.pooled.covariate_names;
    if (d.fit_config.delta_columns.empty()) return names;
    std::vector<std::string> out;
    for (int c : d.fit_config.delta_columns) out.push_back(names[static_cast<std::size_t>(c)]);
    return out;
}

// --- tables -----------------------------------------------------------------

void write_estimates(Outputs& out, const Data& d, const Fitted& f) {
    const auto& names = d.ingest.pooled.covariate_names;
    bdr::io::Table coef(coef_header({"group", "outcome", "region", "threshold"}, names));
    bdr::io::Table tails({"group", "outcome", "side", "anchor", "r0", "alpha", "iterations"});
    for (std::size_t g = 0; g < f.fits.size(); ++g) {
        const auto& fit = f.fits[g];
        for (const auto* mf : {&fit.mu, &fit.nu}) {
            const bool is_y = mf == &fit.mu;
            const auto& og = is_y ? d.grid.y : d.grid.w;
            for (std::size_t k = 0; k < og.size(); ++k) {
                if (!std::isfinite(og.points[k])) continue;
                std::vector<std::string> row{group_label(d, g), is_y ? "y" : "w",
                                             og.in_body(k) ? "body" : "tail",
                                             format_number(og.points[k])};
                const bdr::Vector c = mf->coef_at(og.points[k]);
                for (Eigen::Index j = 0; j < c.size(); ++j) row.push_back(format_number(c(j)));
                coef.row(std::move(row));
            }
            for (const auto* t : {&mf->lower, &mf->upper}) {
                tails.row({group_label(d, g), is_y ? "y" : "w", t == &mf->lower ? "lower" : "upper",
                           format_number(t->anchor), format_number(t->r0), format_number(t->alpha),
                           std::to_string(t->diag.iterations)});
            }
        }
    }
    out.save(coef, "coefficients.csv");
    out.save(tails, "tails.csv");

    bdr::io::Table delta(coef_header({"group", "y", "w", "status", "iterations"}, delta_names(d)));
    bdr::io::Table surface({"group", "y", "w", "value"});
    for (std::size_t g = 0; g < f.fits.size(); ++g) {
        const auto& fit = f.fits[g];
        const auto yb = d.grid.y.body();
        const auto wb = d.grid.w.body();
        for (std::size_t i = 0; i < yb.size(); ++i) {
            for (std::size_t k = 0; k < wb.size(); ++k) {
                const std::size_t p = fit.body_pair(i, k);
                std::vector<std::string> row{group_label(d, g), format_number(yb[i]),
                                             format_number(wb[k]), bdr::to_string(fit.status[p].status),
                                             std::to_string(fit.status[p].iterations)};
                for (Eigen::Index j = 0; j < fit.delta_body[p].size(); ++j) {
                    row.push_back(format_number(fit.delta_body[p](j)));
                }
                delta.row(std::move(row));
            }
        }
        const auto s = bdr::counterfactual_joint_cdf(std::span<const bdr::BdrFit>(&fit, 1),
                                                     std::span<const bdr::Sample>(&d.samples[g], 1),
                                                     {}, d.grid.y.points, d.grid.w.points);
        for (std::size_t i = 0; i < s.y_points.size(); ++i) {
            for (std::size_t k = 0; k < s.w_points.size(); ++k) {
                surface.row({group_label(d, g), format_number(s.y_points[i]), format_number(s.w_points[k]),
                             format_number(s.at(i, k))});
            }
        }
    }
    out.save(delta, "delta.csv");
    out.save(surface, "joint_cdf.csv");
}

/// Point estimate, robust SE and percentile interval of one scalar.
std::vector<std::string> inference_cells(double estimate, const std::vector<double>& draws,
                                         double level) {
    std::vector<std::string> cells{format_number(estimate)};
    try {
        const auto iv = bdr::percentile_interval(draws, level);
        cells.push_back(format_number(bdr::robust_se(draws)));
        cells.push_back(format_number(iv.lo));
        cells.push_back(format_number(iv.hi));
    } catch (const bdr::InferenceError&) {
        cells.insert(cells.end(), 3, "NaN");
    }
    return cells;
}

void write_bootstrap(Outputs& out, const RunConfig& cfg, const Data& d, const Fitted& f) {
    const auto names = delta_names(d);
    bdr::io::Table delta({"group", "y", "w", "coef", "estimate", "se", "lower", "upper"});
    bdr::io::Table surface({"group", "y", "w", "estimate", "se", "lower", "upper"});
    for (std::size_t g = 0; g < f.fits.size(); ++g) {
        const auto& fit = f.fits[g];
        const auto yb = d.grid.y.body();
        const auto wb = d.grid.w.body();
        for (std::size_t i = 0; i < yb.size(); ++i) {
            for (std::size_t k = 0; k < wb.size(); ++k) {
                const std::size_t p = fit.body_pair(i, k);
                for (std::size_t j = 0; j < names.size(); ++j) {
                    std::vector<double> draws;
                    for (std::size_t r : f.usable) {
                        draws.push_back(f.boot[g].draws[r]->delta_body[p](static_cast<Eigen::Index>(j)));
                    }
                    auto row = std::vector<std::string>{group_label(d, g), format_number(yb[i]),
                                                        format_number(wb[k]), names[j]};
                    for (auto& c : inference_cells(fit.delta_body[p](static_cast<Eigen::Index>(j)), draws,
                                                   cfg.level)) {
                        row.push_back(std::move(c));
                    }
                    delta.row(std::move(row));
                }
            }
        }
        const auto one = [&](const bdr::BdrFit& bf, const bdr::Vector& w) {
            return bdr::counterfactual_joint_cdf(std::span<const bdr::BdrFit>(&bf, 1),
                                                 std::span<const bdr::Sample>(&d.samples[g], 1), {},
                                                 d.grid.y.points, d.grid.w.points, w)
                .values;
        };
        const bdr::Matrix est = one(fit, {});
        std::vector<bdr::Matrix> reps;
        for (std::size_t r : f.usable) {
            reps.push_back(one(*f.boot[g].draws[r], f.boot[g].weights(d.samples[g].size(), r)));
        }
        for (Eigen::Index i = 0; i < est.rows(); ++i) {
            for (Eigen::Index k = 0; k < est.cols(); ++k) {
                std::vector<double> draws;
                for (const auto& m : reps) draws.push_back(m(i, k));
                auto row = std::vector<std::string>{group_label(d, g),
                                                    format_number(d.grid.y.points[static_cast<std::size_t>(i)]),
                                                    format_number(d.grid.w.points[static_cast<std::size_t>(k)])};
                for (auto& c : inference_cells(est(i, k), draws, cfg.level)) row.push_back(std::move(c));
                surface.row(std::move(row));
            }
        }
    }
    out.save(delta, "delta_inference.csv");
    out.save(surface, "joint_cdf_inference.csv");
}

/// Fits and sample/weight views of replicate r (or the base estimate when r is empty).
struct View {
    std::vector<bdr::BdrFit> fits;
    std::vector<bdr::Vector> weights;
};

View view(const Data& d, const Fitted& f, std::optional<std::size_t> r) {
    View v;
    for (std::size_t g = 0; g < f.fits.size(); ++g) {
        if (r) {
            v.fits.push_back(*f.boot[g].draws[*r]);
            v.weights.push_back(f.boot[g].weights(d.samples[g].size(), *r));
        } else {
            v.fits.push_back(f.fits[g]);
            v.weights.emplace_back();
        }
    }
    return v;
}

void write_counterfactuals(Outputs& out, const RunConfig& cfg, const Data& d, const Fitted& f,
                           const std::vector<std::string>& indices, bool rho_zero) {
    bdr::io::Table t({"index", "y", "w", "estimate", "se", "lower", "upper"});
    auto surface = [&](const View& v, const std::string& label) -> bdr::Matrix {
        if (label.rfind("rho0:", 0) == 0) {
            const auto g = static_cast<std::size_t>(std::stoi(label.substr(5)));
            return bdr::independence_counterfactual(v.fits[g], d.samples[g], d.grid.y.points,
                                                    d.grid.w.points, v.weights[g])
                .values;
        }
        const auto idx = bdr::CounterfactualIndex::parse(label);
        return bdr::counterfactual_joint_cdf(v.fits, d.samples, idx, d.grid.y.points, d.grid.w.points,
                                             v.weights[static_cast<std::size_t>(idx.m)])
            .values;
    };
    std::vector<std::string> labels = indices;
    if (rho_zero) {
        for (std::size_t g = 0; g < f.fits.size(); ++g) labels.push_back("rho0:" + std::to_string(g));
    }
    const View base = view(d, f, std::nullopt);
    for (const auto& label : labels) {
        const bdr::Matrix est = surface(base, label);
        std::vector<bdr::Matrix> reps;
        for (std::size_t r : f.usable) reps.push_back(surface(view(d, f, r), label));
        for (Eigen::Index i = 0; i < est.rows(); ++i) {
            for (Eigen::Index k = 0; k < est.cols(); ++k) {
                std::vector<double> draws;
                for (const auto& m : reps) draws.push_back(m(i, k));
                auto row = std::vector<std::string>{label,
                                                    format_number(d.grid.y.points[static_cast<std::size_t>(i)]),
                                                    format_number(d.grid.w.points[static_cast<std::size_t>(k)])};
                for (auto& c : inference_cells(est(i, k), draws, cfg.level)) row.push_back(std::move(c));
                t.row(std::move(row));
            }
        }
    }
    out.save(t, "counterfactual.csv");
}

constexpr const char* kComponents[] = {"total", "composition", "sorting", "marginal_w", "marginal_y"};

std::array<const bdr::Matrix*, 5> components(const bdr::DecompositionReport& r) {
    return {&r.total, &r.composition, &r.sorting, &r.marginal_w, &r.marginal_y};
}

/// Long-form decomposition table; `cell_labels` gives the two key columns per entry.
void write_decomposition(Outputs& out, const RunConfig& cfg, const std::string& name,
                         const std::array<std::string, 2>& keys,
                         const std::function<std::array<std::string, 2>(Eigen::Index, Eigen::Index)>& cell_labels,
                         const bdr::DecompositionReport& est, const std::vector<bdr::DecompositionReport>& reps) {
    bdr::io::Table t({"component", keys[0], keys[1], "estimate", "share", "se", "lower", "upper"});
    const auto ec = components(est);
    for (std::size_t c = 0; c < 5; ++c) {
        const bdr::Matrix share = bdr::DecompositionReport::share(*ec[c], est.total);
        for (Eigen::Index i = 0; i < est.total.rows(); ++i) {
            for (Eigen::Index k = 0; k < est.total.cols(); ++k) {
                std::vector<double> draws;
                for (const auto& r : reps) draws.push_back((*components(r)[c])(i, k));
                const auto lab = cell_labels(i, k);
                auto cells = inference_cells((*ec[c])(i, k), draws, cfg.level);
                t.row({kComponents[c], lab[0], lab[1], cells[0], format_number(share(i, k)), cells[1],
                       cells[2], cells[3]});
            }
        }
    }
    out.save(t, name);
}

std::vector<double> cuts_from(const std::vector<double>& explicit_cuts, std::size_t quantiles,
                              const bdr::Vector& values) {
    std::vector<double> cuts{-bdr::kInf};
    if (!explicit_cuts.empty()) {
        cuts.insert(cuts.end(), explicit_cuts.begin(), explicit_cuts.end());
    } else {
        if (quantiles < 2) throw bdr::ConfigError("need at least 2 quantile brackets");
        std::vector<double> sorted(values.data(), values.data() + values.size());
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t q = 1; q < quantiles; ++q) {
            cuts.push_back(bdr::empirical_quantile_lower(sorted, static_cast<double>(q) /
                                                                     static_cast<double>(quantiles)));
        }
    }
    cuts.push_back(bdr::kInf);
    return cuts;
}

// --- manifest ---------------------------------------------------------------

ordered_json manifest(const std::string& command, const RunConfig& cfg, const Data* d, const Fitted* f,
                      const Outputs& out) {
    ordered_json m;
    m["command"] = command;
    m["versions"] = {{"bdr", bdr::kVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                   "." + std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__}};
    if (d) {
        m["config"] = {{"input", cfg.input},
                       {"y", cfg.y_col},
                       {"w", cfg.w_col},
                       {"group", cfg.group_col},
                       {"covariates", cfg.covariates},
                       {"delta_covariates", cfg.delta_covariates},
                       {"grid_points", cfg.grid_points},
                       {"trim", {cfg.trim_lower, cfg.trim_upper}},
                       {"tail_min_obs", cfg.tail_min_obs},
                       {"strict", cfg.strict},
                       {"threads", cfg.threads}};
        m["bootstrap"] = {{"reps", cfg.reps}, {"scheme", cfg.scheme}, {"seed", cfg.seed}, {"level", cfg.level}};
        m["data"] = {{"rows_read", d->ingest.rows_read}, {"rows_dropped", d->ingest.rows_dropped}};
        ordered_json groups = ordered_json::array();
        for (std::size_t g = 0; g < d->samples.size(); ++g) {
            ordered_json e{{"group", group_label(*d, g)}, {"n", d->samples[g].size()}};
            if (f && g < f->fits.size()) {
                const auto& fit = f->fits[g];
                e["grid_pairs"] = {{"converged", fit.count(bdr::FitStatus::converged)},
                                   {"boundary", fit.count(bdr::FitStatus::boundary)},
                                   {"failed", fit.count(bdr::FitStatus::failed)}};
                ordered_json failures = ordered_json::array();
                for (const auto& s : fit.status) {
                    if (s.status == bdr::FitStatus::failed) failures.push_back(s.message);
                }
                e["failures"] = failures;
                if (g < f->boot.size()) {
                    e["bootstrap_failures"] = f->boot[g].failure_count();
                }
            }
            groups.push_back(e);
        }
        m["groups"] = groups;
        if (f && !f->boot.empty()) m["bootstrap"]["usable_replicates"] = f->usable.size();
        m["grid"] = {{"y", d->grid.y.points}, {"w", d->grid.w.points}};
    }
    ordered_json files = ordered_json::array();
    for (const auto& p : out.written) files.push_back(p.filename().string());
    m["outputs"] = files;
    return m;
}

void write_manifest(Outputs& out, const ordered_json& m) {
    std::ofstream os(out.path("manifest.json"));
    os << m.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bivariate distribution regression"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto* estimate = app.add_subcommand("estimate", "Fit marginal and dependence coefficients");
    add_data_options(estimate, cfg);

    auto* bootstrap = app.add_subcommand("bootstrap", "Fit plus exchangeable-bootstrap inference");
    add_data_options(bootstrap, cfg);
    add_bootstrap_options(bootstrap, cfg, true);

    std::vector<std::string> cf_indices;
    bool rho_zero = false;
    auto* counterfactual = app.add_subcommand("counterfactual", "Counterfactual joint CDFs F^(jklm)");
    add_data_options(counterfactual, cfg);
    add_bootstrap_options(counterfactual, cfg, false);
    counterfactual->add_option("--index", cf_indices, "Indices such as 1110 (repeatable)")->delimiter(',');
    counterfactual->add_flag("--rho-zero", rho_zero, "Also emit each group's zero-correlation counterfactual");

    auto* decompose = app.add_subcommand("decompose", "Decompose the group difference in joint CDFs");
    add_data_options(decompose, cfg);
    add_bootstrap_options(decompose, cfg, false);

    std::size_t quantiles = 5;
    std::vector<double> y_cuts, w_cuts;
    std::vector<std::string> tm_indices;
    bool tm_decompose = false;
    auto* transition = app.add_subcommand("transition", "Transition matrices between outcome brackets");
    add_data_options(transition, cfg);
    add_bootstrap_options(transition, cfg, false);
    transition->add_option("--quantiles", quantiles, "Equal-probability brackets per outcome")
        ->capture_default_str();
    transition->add_option("--y-cuts", y_cuts, "Interior cut points for y")->delimiter(',');
    transition->add_option("--w-cuts", w_cuts, "Interior cut points for w")->delimiter(',');
    transition->add_option("--index", tm_indices, "Counterfactual indices (default: each group)")->delimiter(',');
    transition->add_flag("--decompose", tm_decompose, "Also decompose the group difference");

    std::string sim_out = "simulated.csv";
    std::size_t sim_n = 1000, sim_n1 = 0;
    std::uint64_t sim_seed = 1;
    std::vector<double> beta{0.0, 1.0, 0.5}, gamma{0.0, 0.5, -0.5}, delta{0.3, 0.5, -0.3};
    std::vector<double> beta1, gamma1, delta1;
    std::vector<std::string> laws{"uniform:0:1", "bernoulli:0.5"};
    auto* simulate = app.add_subcommand("simulate", "Draw a sample from the Gaussian model");
    simulate->add_option("-o,--output", sim_out, "Output CSV")->capture_default_str();
    simulate->add_option("-n,--n", sim_n, "Sample size (group 0)")->capture_default_str();
    simulate->add_option("--seed", sim_seed, "Seed")->capture_default_str();
    simulate->add_option("--beta", beta, "Location coefficients of y")->delimiter(',');
    simulate->add_option("--gamma", gamma, "Location coefficients of w")->delimiter(',');
    simulate->add_option("--delta", delta, "Dependence coefficients")->delimiter(',');
    simulate->add_option("--covariate-laws", laws, "uniform:lo:hi or bernoulli:p per covariate")->delimiter(',');
    simulate->add_option("--n1", sim_n1, "Size of a second group (0: single group)");
    simulate->add_option("--beta1", beta1, "Group 1 beta (default: beta)")->delimiter(',');
    simulate->add_option("--gamma1", gamma1, "Group 1 gamma (default: gamma)")->delimiter(',');
    simulate->add_option("--delta1", delta1, "Group 1 delta (default: delta)")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    Outputs out;
    out.dir = cfg.out_dir;
    try {
        if (simulate->parsed()) {
            auto to_vec = [](const std::vector<double>& v) {
                return bdr::Vector(Eigen::Map<const bdr::Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
            };
            bdr::DgpSpec spec;
            spec.covariates.clear();
            for (const auto& l : laws) {
                if (l.empty()) continue;
                std::vector<std::string> parts;
                std::stringstream ss(l);
                for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
                if (parts.size() == 3 && parts[0] == "uniform") {
                    spec.covariates.push_back(bdr::CovariateLaw::uniform(std::stod(parts[1]), std::stod(parts[2])));
                } else if (parts.size() == 2 && parts[0] == "bernoulli") {
                    spec.covariates.push_back(bdr::CovariateLaw::bernoulli(std::stod(parts[1])));
                } else {
                    throw bdr::ConfigError("bad covariate law '" + l + "'");
                }
            }
            spec.beta = to_vec(beta);
            spec.gamma = to_vec(gamma);
            spec.delta0 = to_vec(delta);
            spec.n = sim_n;
            spec.seed = sim_seed;
            bdr::Sample s = bdr::generate(spec);
            if (sim_n1 > 0) {
                bdr::DgpSpec s1 = spec;
                if (!beta1.empty()) s1.beta = to_vec(beta1);
                if (!gamma1.empty()) s1.gamma = to_vec(gamma1);
                if (!delta1.empty()) s1.delta0 = to_vec(delta1);
                s1.n = sim_n1;
                s1.seed = sim_seed + 0x9e3779b97f4a7c15ULL;
                s = bdr::combine_groups(s, bdr::generate(s1));
            }
            const fs::path p(sim_out);
            if (p.has_parent_path()) fs::create_directories(p.parent_path());
            std::ofstream os(p);
            if (!os) throw bdr::ConfigError("cannot write '" + sim_out + "'");
            bdr::io::write_sample(os, s);
            std::cerr << "wrote " << s.size() << " rows to " << sim_out << '\n';
            return kOk;
        }

        const bool need_groups = decompose->parsed() || (transition->parsed() && tm_decompose);
        const Data d = load(cfg, need_groups);
        if (counterfactual->parsed()) {
            for (const auto& idx : cf_indices) {
                const auto ci = bdr::CounterfactualIndex::parse(idx);
                if (std::max({ci.j, ci.k, ci.l, ci.m}) >= static_cast<int>(d.samples.size())) {
                    throw bdr::ConfigError("index " + idx + " refers to a missing group");
                }
            }
            if (cf_indices.empty() && !rho_zero) throw bdr::ConfigError("give --index or --rho-zero");
        }
        const Fitted f = fit_all(cfg, d);
        std::cerr << "rows: " << d.ingest.rows_read << " read, " << d.ingest.rows_dropped << " dropped\n";

        if (estimate->parsed() || bootstrap->parsed()) write_estimates(out, d, f);
        if (bootstrap->parsed()) write_bootstrap(out, cfg, d, f);
        if (counterfactual->parsed()) write_counterfactuals(out, cfg, d, f, cf_indices, rho_zero);

        auto reports = [&](auto&& make) {
            std::vector<bdr::DecompositionReport> reps;
            for (std::size_t r : f.usable) reps.push_back(make(view(d, f, r)));
            return std::make_pair(make(view(d, f, std::nullopt)), reps);
        };
        if (decompose->parsed()) {
            const auto [est, reps] = reports([&](const View& v) {
                return bdr::decompose_joint(v.fits, d.samples, d.grid.y.points, d.grid.w.points, v.weights);
            });
            write_decomposition(
                out, cfg, "decomposition.csv", {"y", "w"},
                [&](Eigen::Index i, Eigen::Index k) -> std::array<std::string, 2> {
                    return {format_number(d.grid.y.points[static_cast<std::size_t>(i)]),
                            format_number(d.grid.w.points[static_cast<std::size_t>(k)])};
                },
                est, reps);
        }
        if (transition->parsed()) {
            const auto yc = cuts_from(y_cuts, quantiles, d.ingest.pooled.y);
            const auto wc = cuts_from(w_cuts, quantiles, d.ingest.pooled.w);
            std::vector<std::string> labels = tm_indices;
            if (labels.empty()) {
                for (std::size_t g = 0; g < d.samples.size(); ++g) labels.push_back(std::string(4, char('0' + g)));
            }
            bdr::io::Table t({"index", "row", "col", "y_lo", "y_hi", "w_lo", "w_hi", "estimate", "se", "lower",
                              "upper"});
            for (const auto& label : labels) {
                const auto idx = bdr::CounterfactualIndex::parse(label);
                if (std::max({idx.j, idx.k, idx.l, idx.m}) >= static_cast<int>(d.samples.size())) {
                    throw bdr::ConfigError("index " + label + " refers to a missing group");
                }
                auto cells = [&](const View& v) {
                    const auto s = bdr::counterfactual_joint_cdf(v.fits, d.samples, idx, yc, wc,
                                                                 v.weights[static_cast<std::size_t>(idx.m)]);
                    return bdr::transition_matrix(s).cells;
                };
                const bdr::Matrix est = cells(view(d, f, std::nullopt));
                std::vector<bdr::Matrix> reps;
                for (std::size_t r : f.usable) reps.push_back(cells(view(d, f, r)));
                for (Eigen::Index j = 0; j < est.rows(); ++j) {
                    for (Eigen::Index k = 0; k < est.cols(); ++k) {
                        std::vector<double> draws;
                        for (const auto& m : reps) draws.push_back(m(j, k));
                        const auto ju = static_cast<std::size_t>(j), ku = static_cast<std::size_t>(k);
                        std::vector<std::string> row{label,
                                                     std::to_string(j + 1),
                                                     std::to_string(k + 1),
                                                     format_number(yc[ju]),
                                                     format_number(yc[ju + 1]),
                                                     format_number(wc[ku]),
                                                     format_number(wc[ku + 1])};
                        for (auto& c : inference_cells(est(j, k), draws, cfg.level)) row.push_back(std::move(c));
                        t.row(std::move(row));
                    }
                }
            }
            out.save(t, "transition.csv");
            if (tm_decompose) {
                const auto [est, reps] = reports([&](const View& v) {
                    return bdr::decompose_transition(v.fits, d.samples, yc, wc, v.weights);
                });
                write_decomposition(
                    out, cfg, "transition_decomposition.csv", {"row", "col"},
                    [](Eigen::Index j, Eigen::Index k) -> std::array<std::string, 2> {
                        return {std::to_string(j + 1), std::to_string(k + 1)};
                    },
                    est, reps);
            }
        }
        write_manifest(out, manifest(app.get_subcommands().front()->get_name(), cfg, &d, &f, out));
        std::cerr << "outputs in " << out.dir.string() << '\n';
        return kOk;
    } catch (const bdr::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        if (cfg.strict) out.remove_all();
        return kConfig;
    } catch (const bdr::ValidationError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        if (cfg.strict) out.remove_all();
        return kData;
    } catch (const bdr::Error& e) {
        std::cerr << "estimation error: " << e.what() << '\n';
        if (cfg.strict) out.remove_all();
        return kEstimation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        if (cfg.strict) out.remove_all();
        return kConfig;
    }
}
