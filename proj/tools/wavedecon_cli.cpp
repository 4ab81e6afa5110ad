#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <wavedecon/density.hpp>
#include <wavedecon/estimator.hpp>
#include <wavedecon/io.hpp>
#include <wavedecon/simlab.hpp>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace wavedecon;

namespace {

std::optional<fs::path> cache_dir_from_env() {
    if (const char* d = std::getenv("WAVEDECON_CACHE_DIR"); d && *d) return fs::path(d);
    return std::nullopt;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("not a number: '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError("empty list");
    return out;
}

/// "a:b:step" or a comma list.
std::vector<double> parse_grid(const std::string& s) {
    if (s.find(':') == std::string::npos) return parse_list(s);
    std::string t = s;
    std::replace(t.begin(), t.end(), ':', ',');
    const auto v = parse_list(t);
    if (v.size() != 3 || !(v[2] > 0.0) || v[1] < v[0]) throw ConfigError("grid must be lo:hi:step");
    std::vector<double> g;
    const auto count = static_cast<std::size_t>(std::floor((v[1] - v[0]) / v[2] + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) g.push_back(v[0] + static_cast<double>(i) * v[2]);
    return g;
}

std::vector<int> parse_ints(const std::string& s) {
    std::vector<int> out;
    if (s.empty() || s == "none") return out;
    for (double v : parse_list(s)) out.push_back(static_cast<int>(v));
    return out;
}

json to_json(const ResolutionIndex& j) { return json(j.levels); }

/// Scenario from a preset name or a JSON file with the same fields.
Scenario load_scenario(const std::string& spec) {
    if (!fs::exists(spec)) return preset(spec);
    std::ifstream in(spec);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("scenario file " + spec + ": " + e.what());
    }
    Scenario s = j.contains("preset") ? preset(j["preset"].get<std::string>()) : Scenario{};
    s.id = j.value("id", fs::path(spec).stem().string());
    if (j.contains("function") && j["function"] != "doppler")
        throw ConfigError("only the doppler regression function is available from scenario files");
    if (j.contains("design")) s.design = parse_design(j["design"].get<std::string>());
    s.n = j.value("n", s.n);
    s.noise_sd = j.value("noise_sd", j.value("s", s.noise_sd));
    if (j.contains("noise")) s.noise = parse_noise_component(j["noise"].get<std::string>());
    if (j.contains("points")) s.points = j["points"].get<std::vector<double>>();
    s.replications = j.value("replications", s.replications);
    s.seed = j.value("seed", s.seed);
    s.validate();
    return s;
}

json summary_json(const Scenario& sc, const ResultsTable& t) {
    json mae_map = json::object();
    for (double x0 : sc.points) {
        std::ostringstream key;
        key << design_info(sc.design).name << "/" << io::shortest(sc.laplace_scale()) << "/" << io::shortest(x0);
        if (t.at(x0).empty())
            mae_map[key.str()] = nullptr;
        else
            mae_map[key.str()] = mae(t, x0);
    }
    json j;
    j["schema"] = "wavedecon.simulate/1";
    j["scenario"] = sc.id;
    j["design"] = design_info(sc.design).name;
    j["noise"] = describe(sc.noise);
    j["n"] = sc.n;
    j["replications"] = sc.replications;
    j["seed"] = sc.seed;
    j["mae"] = mae_map;
    if (std::holds_alternative<LaplaceNoise>(sc.noise))
        j["reliability_ratio"] = reliability_ratio(sc.design, sc.laplace_scale());
    j["failures"] = t.failures;
    j["rows"] = t.rows.size();
    j["runtime_seconds"] = t.seconds;
    return j;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << s;
}

template <typename F>
void write_with(const fs::path& p, F&& f) {
    std::ostringstream os;
    f(os);
    write_text(p, os.str());
}

struct Common {
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    std::string wavelet = "coif5";
    double widen = 1.0;

    RunOptions options() const {
        RunOptions o;
        o.threads = threads;
        o.wavelet = wavelet;
        o.widen = widen;
        o.cache_dir = cache_dir_from_env();
        return o;
    }
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--threads", c.threads, "Worker threads (output does not depend on it)")
        ->check(CLI::PositiveNumber);
    app->add_option("--wavelet", c.wavelet, "Wavelet basis, e.g. coif5 or db8");
    app->add_option("--widen", c.widen, "Scale factor for tabulated covariate ranges")->check(CLI::PositiveNumber);
}

// ---------------------------------------------------------------------------

struct EstimateArgs {
    std::string data, x, noise = "laplace:0.075", wavelet = "coif5", variant = "practical", out;
    std::string bandwidths;
    double gamma = 0.5, gamma_tilde = 1.0, epsilon = 0.1, noise_sd = 0.0, m_sup = 0.0, kappa = 1.0;
    int max_level = -1;
};

int run_estimate(const EstimateArgs& a) {
    const Dataset data = io::read_dataset(a.data);
    const auto x = parse_list(a.x);
    if (x.size() != data.dim())
        throw ConfigError("--x has " + std::to_string(x.size()) + " coordinates, data has " +
                          std::to_string(data.dim()));
    EstimatorConfig est;
    est.gamma = a.gamma;
    est.gamma_tilde = a.gamma_tilde;
    est.epsilon = a.epsilon;
    est.noise_sd = a.noise_sd;
    est.m_sup = a.m_sup;
    if (a.variant == "theoretical")
        est.variant = Variant::theoretical;
    else if (a.variant != "practical")
        throw ConfigError("variant must be practical or theoretical");
    if (a.max_level >= 0) est.max_total_level = a.max_level;
    DensityConfig dens;
    dens.kappa = a.kappa;
    if (!a.bandwidths.empty()) dens.bandwidths = parse_grid(a.bandwidths);

    const DeconvContext ctx(load_wavelet(a.wavelet), NoiseModel::parse(a.noise, data.dim()), 10, {}, {},
                            cache_dir_from_env());
    EstimateReport r;
    try {
        r = estimate_m(data, ctx, x, est, dens);
    } catch (const RangeError&) {
        r = estimate_m(data, ctx.widened(), x, est, dens);
    }

    json j;
    j["schema"] = "wavedecon.estimate/1";
    j["x"] = r.x;
    j["n"] = data.size();
    j["noise"] = ctx.noise().describe();
    j["wavelet"] = ctx.basis().name();
    j["variant"] = variant_name(est.variant);
    j["gamma"] = est.gamma;
    j["m_hat"] = r.m_hat;
    j["p_hat"] = r.p_hat;
    j["j_hat"] = to_json(r.selection.j_hat);
    j["f_hat"] = r.f_hat;
    j["bandwidth"] = r.density.bandwidth;
    j["denominator"] = r.denominator;
    j["floor_active"] = r.floor_active;
    j["outside_theory"] = r.selection.outside_theory;
    json diag = json::array();
    for (const auto& d : r.selection.diagnostics)
        diag.push_back({{"j", to_json(d.j)},
                        {"p_hat", d.p_hat},
                        {"sigma_hat_sq", d.sigma_hat_sq},
                        {"sigma_tilde_sq", d.sigma_tilde_sq},
                        {"sup_t", d.sup_t},
                        {"big_c", d.big_c},
                        {"small_c", d.small_c},
                        {"gamma", d.gamma},
                        {"gamma_star", d.gamma_star},
                        {"risk", d.risk}});
    j["diagnostics"] = diag;
    json bw = json::array();
    for (std::size_t i = 0; i < r.density.bandwidths.size(); ++i)
        bw.push_back({{"h", r.density.bandwidths[i]},
                      {"f_hat", r.density.estimates[i]},
                      {"criterion", r.density.criteria[i]}});
    j["bandwidth_grid"] = bw;

    const std::string text = j.dump(2) + "\n";
    if (a.out.empty() || a.out == "-")
        std::cout << text;
    else
        write_text(a.out, text);
    return 0;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string scenario = "paper-u-0075", out_dir = ".", points;
    std::optional<std::size_t> reps, n;
    std::optional<std::uint64_t> seed;
};

void apply_overrides(Scenario& sc, const SimulateArgs& a) {
    if (a.reps) sc.replications = *a.reps;
    if (a.seed) sc.seed = *a.seed;
    if (a.n) sc.n = *a.n;
    if (!a.points.empty()) sc.points = parse_list(a.points);
    sc.validate();
}

void write_error_manifest(const fs::path& dir, const std::string& name, const ResultsTable& t) {
    json errors = json::array();
    for (const auto& r : t.rows)
        if (!r.ok) errors.push_back({{"scenario", r.scenario}, {"replication", r.replication}, {"x0", r.x0},
                                     {"error", r.error}});
    write_text(dir / name, json({{"schema", "wavedecon.errors/1"}, {"errors", errors}}).dump(2) + "\n");
}

int run_simulate(const SimulateArgs& a, const Common& c) {
    Scenario sc = load_scenario(a.scenario);
    apply_overrides(sc, a);
    const fs::path dir = a.out_dir;
    fs::create_directories(dir);
    const auto t = run_monte_carlo(sc, EstimatorConfig{}, DensityConfig{}, c.options());
    write_with(dir / (sc.id + ".csv"), [&](std::ostream& os) { io::write_results(os, t); });
    write_text(dir / (sc.id + ".json"), summary_json(sc, t).dump(2) + "\n");
    if (t.failures) {
        write_error_manifest(dir, sc.id + "-errors.json", t);
        std::cerr << t.failures << " of " << t.rows.size() << " rows failed; see " << sc.id << "-errors.json\n";
        return 1;
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct ScanArgs {
    std::string scenario = "paper-b22-0075", grid = "0.05:2:0.05", out_dir = ".";
    double x = 0.25;
    double threshold = 1.5;
    std::optional<std::size_t> reps;
    std::optional<std::uint64_t> seed;
};

json curve_json(const Scenario& sc, double x0, const GammaCurve& c) {
    json j;
    j["schema"] = "wavedecon.gamma-scan/1";
    j["scenario"] = sc.id;
    j["x0"] = x0;
    j["replications"] = sc.replications;
    j["gammas"] = c.gammas;
    j["risks"] = c.risks;
    j["max_jump_ratio"] = c.max_jump_ratio;
    j["jump"] = c.jump;
    return j;
}

GammaCurve do_scan(const Scenario& sc, const std::vector<double>& grid, double x0, const Common& c,
                   double threshold) {
    const auto opt = c.options();
    const auto ctx = make_context(sc, opt);
    try {
        return gamma_scan(sc, ctx, grid, x0, {}, opt.threads, threshold);
    } catch (const RangeError&) {
        return gamma_scan(sc, ctx.widened(), grid, x0, {}, opt.threads, threshold);
    }
}

int run_gamma_scan(const ScanArgs& a, const Common& c) {
    Scenario sc = load_scenario(a.scenario);
    if (a.reps) sc.replications = *a.reps;
    if (a.seed) sc.seed = *a.seed;
    sc.validate();
    const fs::path dir = a.out_dir;
    fs::create_directories(dir);
    const auto curve = do_scan(sc, parse_grid(a.grid), a.x, c, a.threshold);
    write_with(dir / "gamma-curve.csv", [&](std::ostream& os) { io::write_gamma_curve(os, curve); });
    write_with(dir / "gamma-rows.csv", [&](std::ostream& os) { io::write_gamma_rows(os, curve); });
    write_text(dir / "gamma-curve.json", curve_json(sc, a.x, curve).dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------------

struct ReproduceArgs {
    std::string tables = "1,3", figures = "3,4,5", out_dir = "reproduction";
    std::size_t reps = 100;
    std::uint64_t seed = Scenario{}.seed;
};

bool has(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

int run_reproduce(const ReproduceArgs& a, const Common& c) {
    const auto tables = parse_ints(a.tables);
    const auto figures = parse_ints(a.figures);
    const fs::path dir = a.out_dir;
    fs::create_directories(dir);
    const auto start = std::chrono::steady_clock::now();
    json manifest;
    manifest["schema"] = "wavedecon.reproduce/1";
    manifest["replications"] = a.reps;
    manifest["seed"] = a.seed;
    json files = json::array();
    json errors = json::array();

    if (has(tables, 1)) {
        write_with(dir / "table-1.csv", [&](std::ostream& os) {
            os << "design,sigma,variance,ratio,ratio_2dp\n";
            for (double sigma : {0.075, 0.10})
                for (const auto& d : kDesigns) {
                    const double r = reliability_ratio(d.design, sigma);
                    os << io::quote(d.name) << "," << io::fmt(sigma) << "," << io::fmt(design_variance(d.design))
                       << "," << io::fmt(r) << "," << io::shortest(truncate_2dp(r)) << "\n";
                }
        });
        files.push_back("table-1.csv");
    }

    const bool need_mc = has(tables, 3) || has(figures, 4) || has(figures, 5);
    if (need_mc) {
        std::vector<std::pair<Scenario, ResultsTable>> cells;
        for (const auto& name : preset_names()) {
            Scenario sc = preset(name);
            sc.replications = a.reps;
            sc.seed = a.seed;
            auto t = run_monte_carlo(sc, EstimatorConfig{}, DensityConfig{}, c.options());
            for (const auto& r : t.rows)
                if (!r.ok) errors.push_back({{"scenario", r.scenario}, {"replication", r.replication},
                                             {"x0", r.x0}, {"error", r.error}});
            cells.emplace_back(std::move(sc), std::move(t));
        }
        ResultsTable all;
        for (const auto& [sc, t] : cells) {
            all.rows.insert(all.rows.end(), t.rows.begin(), t.rows.end());
            all.failures += t.failures;
        }
        write_with(dir / "results.csv", [&](std::ostream& os) { io::write_results(os, all); });
        files.push_back("results.csv");
        if (has(tables, 3)) {
            write_with(dir / "table-3.csv", [&](std::ostream& os) {
                os << "design,sigma,x0,mae,replications_ok\n";
                for (const auto& [sc, t] : cells)
                    for (double x0 : sc.points) {
                        const auto ok = t.at(x0).size();
                        os << io::quote(design_info(sc.design).name) << "," << io::fmt(sc.laplace_scale()) << ","
                           << io::fmt(x0) << "," << (ok ? io::fmt(mae(t, x0)) : std::string("nan")) << "," << ok
                           << "\n";
                    }
            });
            files.push_back("table-3.csv");
        }
        for (int fig : {4, 5}) {
            if (!has(figures, fig)) continue;
            const double x0 = fig == 4 ? 0.25 : 0.90;
            ResultsTable sub;
            for (const auto& r : all.rows)
                if (std::abs(r.x0 - x0) < 1e-12) sub.rows.push_back(r);
            const std::string name = "figure-" + std::to_string(fig) + ".csv";
            write_with(dir / name, [&](std::ostream& os) { io::write_results(os, sub); });
            files.push_back(name);
        }
    }

    if (has(figures, 3)) {
        Scenario sc = preset("paper-b22-0075");
        sc.replications = a.reps;
        sc.seed = a.seed;
        const auto curve = do_scan(sc, parse_grid("0.05:2:0.05"), 0.25, c, 1.5);
        write_with(dir / "figure-3.csv", [&](std::ostream& os) { io::write_gamma_curve(os, curve); });
        write_with(dir / "figure-3-rows.csv", [&](std::ostream& os) { io::write_gamma_rows(os, curve); });
        write_text(dir / "figure-3.json", curve_json(sc, 0.25, curve).dump(2) + "\n");
        for (const char* f : {"figure-3.csv", "figure-3-rows.csv", "figure-3.json"}) files.push_back(f);
    }

    if (has(figures, 1)) {
        write_with(dir / "figure-1.csv", [&](std::ostream& os) {
            os << "x,m\n";
            for (int i = 0; i <= 1000; ++i) os << io::fmt(i / 1000.0) << "," << io::fmt(doppler(i / 1000.0)) << "\n";
        });
        files.push_back("figure-1.csv");
    }
    if (has(figures, 2)) {
        write_with(dir / "figure-2.csv", [&](std::ostream& os) {
            os << "design,x,w,y\n";
            for (const auto& d : kDesigns) {
                Scenario sc;
                sc.design = d.design;
                sc.seed = a.seed;
                const auto sim = generate_dataset(sc, 0);
                for (std::size_t u = 0; u < sc.n; ++u)
                    os << io::quote(d.name) << "," << io::fmt(sim.x[u]) << "," << io::fmt(sim.data.covariate(u)[0])
                       << "," << io::fmt(sim.data.response(u)) << "\n";
            }
        });
        files.push_back("figure-2.csv");
    }

    manifest["files"] = files;
    manifest["errors"] = errors;
    manifest["runtime_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    if (!errors.empty()) {
        std::cerr << errors.size() << " failed rows; see manifest.json\n";
        return 1;
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct CacheArgs {
    std::string action = "warm", noise = "laplace:0.075", wavelet = "coif5";
    int max_level = 7;
};

int run_cache(const CacheArgs& a) {
    const auto dir = cache_dir_from_env();
    if (!dir) throw ConfigError("set WAVEDECON_CACHE_DIR to use the table cache");
    if (a.action == "clear") {
        std::size_t removed = 0;
        if (fs::exists(*dir))
            for (const auto& e : fs::directory_iterator(*dir))
                if (e.path().filename().string().starts_with("dj-") && e.path().extension() == ".bin")
                    removed += fs::remove(e.path());
        std::cout << "removed " << removed << " tables from " << dir->string() << "\n";
        return 0;
    }
    if (a.action != "warm") throw ConfigError("cache action must be warm or clear");
    const DeconvContext ctx(load_wavelet(a.wavelet), NoiseModel::parse(a.noise, 1), 10, {}, {}, dir);
    for (int j = 0; j <= a.max_level; ++j) (void)ctx.table(0, j);
    std::cout << "cached j = 0.." << a.max_level << " in " << dir->string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive wavelet deconvolution regression"};
    app.require_subcommand(1);
    Common common;

    EstimateArgs est;
    auto* estimate = app.add_subcommand("estimate", "Estimate m(x) from a CSV of (W..., Y)");
    estimate->add_option("--data", est.data, "CSV with header, columns W_1..W_d,Y")->required();
    estimate->add_option("--x", est.x, "Evaluation point, comma-separated for d > 1")->required();
    estimate->add_option("--noise", est.noise, "dirac | laplace:s | gamma:k:theta, comma-separated per axis");
    estimate->add_option("--wavelet", est.wavelet, "Wavelet basis, e.g. coif5 or db8");
    estimate->add_option("--gamma", est.gamma, "Penalty constant of the level selection");
    estimate->add_option("--gamma-tilde", est.gamma_tilde, "Variance inflation constant (theoretical variant)");
    estimate->add_option("--epsilon", est.epsilon, "Penalty slack");
    estimate->add_option("--variant", est.variant, "practical | theoretical");
    estimate->add_option("--noise-sd", est.noise_sd, "Regression noise sd (theoretical variant)");
    estimate->add_option("--m-sup", est.m_sup, "Bound on |m| (theoretical variant)");
    estimate->add_option("--max-level", est.max_level, "Override the largest S_j");
    estimate->add_option("--kappa", est.kappa, "Bandwidth selection constant");
    estimate->add_option("--bandwidths", est.bandwidths, "Bandwidth grid, list or lo:hi:step");
    estimate->add_option("--out", est.out, "Output JSON (default stdout)");

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo run of one scenario");
    simulate->add_option("--scenario", sim.scenario, "Preset name or JSON file");
    simulate->add_option("--reps", sim.reps, "Replications (overrides the scenario)");
    simulate->add_option("--seed", sim.seed, "Base seed");
    simulate->add_option("--n", sim.n, "Sample size");
    simulate->add_option("--points", sim.points, "Comma-separated evaluation points");
    simulate->add_option("--out-dir", sim.out_dir, "Directory for <id>.csv and <id>.json");
    add_common(simulate, common);

    ScanArgs scan;
    auto* gscan = app.add_subcommand("gamma-scan", "Pointwise risk as a function of gamma");
    gscan->add_option("--scenario", scan.scenario, "Preset name or JSON file");
    gscan->add_option("--grid", scan.grid, "List or lo:hi:step");
    gscan->add_option("--x", scan.x, "Evaluation point");
    gscan->add_option("--reps", scan.reps, "Replications (overrides the scenario)");
    gscan->add_option("--seed", scan.seed, "Base seed");
    gscan->add_option("--jump-threshold", scan.threshold, "Adjacent risk ratio flagged as a jump");
    gscan->add_option("--out-dir", scan.out_dir, "Output directory");
    add_common(gscan, common);

    ReproduceArgs rep;
    auto* reproduce = app.add_subcommand("reproduce", "Tables and figure data of the simulation study");
    reproduce->add_option("--tables", rep.tables, "Subset of 1,3 (or none)");
    reproduce->add_option("--figures", rep.figures, "Subset of 1,2,3,4,5 (or none)");
    reproduce->add_option("--reps", rep.reps, "Replications per scenario");
    reproduce->add_option("--seed", rep.seed, "Base seed");
    reproduce->add_option("--out-dir", rep.out_dir, "Output directory");
    add_common(reproduce, common);

    CacheArgs cache;
    auto* cache_cmd = app.add_subcommand("cache", "Warm or clear the table cache in $WAVEDECON_CACHE_DIR");
    cache_cmd->add_option("action", cache.action, "warm | clear");
    cache_cmd->add_option("--noise", cache.noise, "Noise whose tables to build");
    cache_cmd->add_option("--wavelet", cache.wavelet, "Wavelet basis");
    cache_cmd->add_option("--max-level", cache.max_level, "Build levels 0..max");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*estimate) return run_estimate(est);
        if (*simulate) return run_simulate(sim, common);
        if (*gscan) return run_gamma_scan(scan, common);
        if (*reproduce) return run_reproduce(rep, common);
        if (*cache_cmd) return run_cache(cache);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
