#include "actangle/cli.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"

#include "actangle/catalog.hpp"
#include "actangle/error.hpp"

namespace actangle {

namespace {

namespace fs = std::filesystem;

// Raised by a pipeline stage; carries the stage name and exit code for the report.
struct StageFailure {
    std::string stage;
    std::string message;
    int code;
};

void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw PreconditionError(where + " must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw PreconditionError("unknown key '" + key + "' in " + where);
}

template <class T>
void take(Json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw PreconditionError(std::string("option '") + key + "' has the wrong type");
    }
    j.erase(key);
}

void require_positive(double v, const char* name) {
    if (!(v > 0.0)) throw PreconditionError(std::string(name) + " must be positive");
}

void log(const RunContext& ctx, const std::string& line) {
    if (ctx.log) *ctx.log << line << '\n';
}

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const PreconditionError& e) {
        throw StageFailure{name, e.what(), kUsageError};
    } catch (const ParseError& e) {
        throw StageFailure{name, e.what(), kUsageError};
    } catch (const Error& e) {
        throw StageFailure{name, e.what(), kNumericalError};
    }
}

std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw PreconditionError("cannot write " + path.string());
    f << text;
}

Json base_report(const char* command, const JobConfig& cfg, const RunContext& ctx) {
    return {{"command", command}, {"config", config_to_json(cfg)}, {"seed_rng", ctx.seed_rng}};
}

int finish(Json& report, const RunContext& ctx, const char* file, int code) {
    report["exit_code"] = code;
    report["pass"] = code == kPass;
    fs::create_directories(ctx.out);
    write_json_file((ctx.out / file).string(), report);
    return code;
}

// Hypothesis checks shared by analyze and chart. Returns the built chart, or nothing when a
// check failed (report already filled).
std::optional<Chart> run_checks(const JobConfig& cfg, const RunContext& ctx, Json& report) {
    const IntegrableSystem& sys = cfg.system;
    const ChartOptions& co = cfg.options.chart;
    Json checks;

    log(ctx, "regularity");
    const auto reg = stage("regularity", [&] { return check_regular(sys, cfg.seed, co.regularity_tol); });
    checks["regularity"] = {{"rank", reg.rank},
                            {"sigma_min", reg.sigma_min},
                            {"sigma_max", reg.sigma_max},
                            {"tol", co.regularity_tol},
                            {"pass", reg.regular}};
    if (!reg.regular) {
        report["checks"] = checks;
        return std::nullopt;
    }

    log(ctx, "section");
    SectionOptions so = co.section;
    so.regularity_tol = co.regularity_tol;
    const Section section = stage("section", [&] { return Section::build(sys, cfg.box, cfg.seed, so); });
    report["section"] = {{"resolution", section.resolution()},
                         {"nodes", section.node_count()},
                         {"max_node_residual", section.max_node_residual()}};

    log(ctx, "involution");
    std::vector<Vec> points{cfg.seed};
    for (int k = 0; k < section.node_count(); ++k) points.push_back(section.node_point(k));
    const auto inv = stage("involution", [&] { return check_involution(sys, points, co.involution_tol); });
    checks["involution"] = {{"max_bracket", inv.max_bracket},
                            {"worst_pair", {inv.worst_i + 1, inv.worst_j + 1}},
                            {"points", points.size()},
                            {"tol", co.involution_tol},
                            {"pass", inv.pass}};
    if (!inv.pass) {
        report["checks"] = checks;
        return std::nullopt;
    }

    log(ctx, "completeness probe");
    const auto probe =
        stage("completeness", [&] { return completeness_probe(sys, cfg.seed, cfg.options.probe_time, co.integrator); });
    report["completeness_probe"] = {{"horizon", cfg.options.probe_time},
                                    {"escaped", probe.escaped},
                                    {"field", probe.escaped ? probe.field + 1 : 0},
                                    {"time", probe.time},
                                    {"note", "leaving the escape box is not a proof of incompleteness"}};

    log(ctx, "lattice and continuation");
    Chart chart = stage("lattice", [&] { return Chart::build(sys, section, co); });
    report["lattice"] = lattice_to_json(chart.seed_lattice());
    Json nodes = Json::array();
    for (int k = 0; k < section.node_count(); ++k)
        nodes.push_back({{"J", vec_to_json(section.node_level(k))},
                         {"basis", mat_to_json(chart.node_bases()[k])},
                         {"actions", vec_to_json(chart.node_actions()[k])}});
    report["continuation"] = {{"nodes", nodes}, {"rank", chart.rank()}};
    const bool rank_ok = !cfg.options.expected_rank || *cfg.options.expected_rank == chart.rank();
    checks["lattice_rank"] = {{"found", chart.rank()}, {"pass", rank_ok}};
    if (cfg.options.expected_rank) checks["lattice_rank"]["expected"] = *cfg.options.expected_rank;
    report["checks"] = checks;
    if (!rank_ok) return std::nullopt;
    return chart;
}

template <class F>
int guarded(Json& report, const RunContext& ctx, const char* file, F&& body) {
    try {
        return body();
    } catch (const StageFailure& f) {
        report["error"] = {{"stage", f.stage}, {"message", f.message}};
        log(ctx, "error in stage " + f.stage + ": " + f.message);
        return finish(report, ctx, file, f.code);
    }
}

}  // namespace

JobConfig parse_config(const Json& doc) {
    reject_unknown(doc, {"system", "box", "seed", "options"}, "config");
    if (!doc.contains("system")) throw PreconditionError("config is missing 'system'");
    const Json& js = doc.at("system");
    std::optional<CatalogEntry> entry;
    std::optional<IntegrableSystem> sys;
    std::string label;
    try {
        if (js.is_object() && js.contains("catalog")) {
            reject_unknown(js, {"catalog"}, "system");
            label = js.at("catalog").get<std::string>();
            entry = catalog_get(label);
            label = entry->name;
            sys = entry->system;
        } else {
            reject_unknown(js, {"dimension", "integrals", "name"}, "system");
            if (!js.contains("dimension") || !js.contains("integrals"))
                throw PreconditionError("inline system needs 'dimension' and 'integrals'");
            const int dim = js.at("dimension").get<int>();
            const auto sources = js.at("integrals").get<std::vector<std::string>>();
            label = js.value("name", std::string("inline"));
            sys = IntegrableSystem::from_sources(dim, sources, label);
        }
    } catch (const Json::exception&) {
        throw PreconditionError("system definition has the wrong type");
    }

    Box box;
    Vec seed;
    if (doc.contains("box")) {
        const Json& jb = doc.at("box");
        reject_unknown(jb, {"lo", "hi"}, "box");
        if (!jb.contains("lo") || !jb.contains("hi")) throw PreconditionError("box needs 'lo' and 'hi'");
        box = Box(vec_from_json(jb.at("lo")), vec_from_json(jb.at("hi")));
    } else if (entry) {
        box = entry->box;
    } else {
        throw PreconditionError("inline system needs a 'box'");
    }
    if (doc.contains("seed"))
        seed = vec_from_json(doc.at("seed"));
    else if (entry)
        seed = entry->seed;
    else
        throw PreconditionError("inline system needs a 'seed'");
    if (box.dim() != sys->dof()) throw PreconditionError("box dimension must equal the number of integrals");
    if (seed.size() != sys->dim()) throw PreconditionError("seed dimension must be twice the number of integrals");
    for (int k = 0; k < box.dim(); ++k)
        if (!(box.lo[k] < box.hi[k])) throw PreconditionError("box must be nonempty on every axis");

    JobOptions o;
    if (entry) o.expected_rank = entry->rank;
    if (doc.contains("options")) {
        Json rest = doc.at("options");
        if (!rest.is_object()) throw PreconditionError("options must be a JSON object");
        take(rest, "probe_time", o.probe_time);
        take(rest, "gauge_degree", o.gauge_degree);
        take(rest, "gauge_samples", o.gauge_samples);
        take(rest, "verify_samples", o.verify_samples);
        take(rest, "integrals_samples", o.integrals_samples);
        take(rest, "fd_step", o.fd_step);
        take(rest, "fiber_extent", o.fiber_extent);
        take(rest, "canonical_tol", o.canonical_tol);
        take(rest, "integrals_tol", o.integrals_tol);
        take(rest, "orbit_count", o.orbit_count);
        take(rest, "orbit_points", o.orbit_points);
        take(rest, "action_points", o.action_points);
        take(rest, "chart_file", o.chart_file);
        if (rest.contains("expected_rank")) {
            int r = 0;
            take(rest, "expected_rank", r);
            o.expected_rank = r;
        }
        try {
            o.chart = options_from_json(rest);
        } catch (const Json::exception&) {
            throw PreconditionError("an option has the wrong type");
        }
    }
    const ChartOptions& c = o.chart;
    require_positive(c.integrator.rtol, "rtol");
    require_positive(c.integrator.atol, "atol");
    require_positive(c.search.s_max, "s_max");
    require_positive(c.search.grid_step, "grid_step");
    require_positive(c.section.tol, "section_tol");
    require_positive(c.lattice_tol, "lattice_tol");
    require_positive(c.involution_tol, "involution_tol");
    require_positive(c.regularity_tol, "regularity_tol");
    require_positive(o.probe_time, "probe_time");
    require_positive(o.fd_step, "fd_step");
    require_positive(o.canonical_tol, "canonical_tol");
    require_positive(o.integrals_tol, "integrals_tol");
    if (!(o.fiber_extent >= 0.0)) throw PreconditionError("fiber_extent must be nonnegative");
    if (o.gauge_samples < 1 || o.verify_samples < 1 || o.integrals_samples < 1 || o.orbit_count < 1 ||
        o.orbit_points < 2 || o.action_points < 2)
        throw PreconditionError("sample counts must be positive (orbit_points and action_points at least 2)");
    if (o.gauge_degree < 0) throw PreconditionError("gauge_degree must be nonnegative");
    c.integrator.validate(sys->dim());
    validate_fd_step(o.fd_step);
    return JobConfig{label, *sys, box, seed, o};
}

Json config_to_json(const JobConfig& cfg) {
    Json integrals = Json::array();
    for (const auto& e : cfg.system.integrals()) integrals.push_back(e.source());
    Json opts = options_to_json(cfg.options.chart);
    const JobOptions& o = cfg.options;
    opts["probe_time"] = o.probe_time;
    opts["gauge_degree"] = o.gauge_degree;
    opts["gauge_samples"] = o.gauge_samples;
    opts["verify_samples"] = o.verify_samples;
    opts["integrals_samples"] = o.integrals_samples;
    opts["fd_step"] = o.fd_step;
    opts["fiber_extent"] = o.fiber_extent;
    opts["canonical_tol"] = o.canonical_tol;
    opts["integrals_tol"] = o.integrals_tol;
    opts["orbit_count"] = o.orbit_count;
    opts["orbit_points"] = o.orbit_points;
    opts["action_points"] = o.action_points;
    opts["chart_file"] = o.chart_file;
    opts["expected_rank"] = o.expected_rank ? Json(*o.expected_rank) : Json(nullptr);
    return {{"system",
             {{"name", cfg.system_label}, {"dimension", cfg.system.dof()}, {"integrals", integrals}}},
            {"box", {{"lo", vec_to_json(cfg.box.lo)}, {"hi", vec_to_json(cfg.box.hi)}}},
            {"seed", vec_to_json(cfg.seed)},
            {"options", opts}};
}

int cmd_analyze(const JobConfig& cfg, const RunContext& ctx) {
    Json report = base_report("analyze", cfg, ctx);
    return guarded(report, ctx, "analyze.json", [&] {
        const auto chart = run_checks(cfg, ctx, report);
        return finish(report, ctx, "analyze.json", chart ? kPass : kCheckFailed);
    });
}

int cmd_chart(const JobConfig& cfg, const RunContext& ctx) {
    Json report = base_report("chart", cfg, ctx);
    return guarded(report, ctx, "report.json", [&] {
        const auto built = run_checks(cfg, ctx, report);
        if (!built) {
            report["refused"] = "hypothesis checks failed; no chart was built";
            return finish(report, ctx, "report.json", kCheckFailed);
        }
        const JobOptions& o = cfg.options;
        fs::create_directories(ctx.out);
        const fs::path chart_path = ctx.out / "chart.json";
        write_json_file(chart_path.string(), chart_to_json(*built));

        log(ctx, "gauge fit");
        const auto gauge_samples =
            stage("gauge", [&] { return sample_chart(*built, o.gauge_samples, ctx.seed_rng, o.fiber_extent); });
        const GaugeFit fit = stage("gauge", [&] { return gauge_fix(*built, gauge_samples, o.gauge_degree, o.fd_step); });
        report["gauge_fit"] = fit_report_to_json(fit.report);
        write_json_file(chart_path.string(), chart_to_json(fit.chart));

        log(ctx, "verification");
        const auto verify_samples = stage("verify", [&] {
            return sample_chart(fit.chart, o.verify_samples, ctx.seed_rng + 1, o.fiber_extent);
        });
        const VerificationReport vr =
            stage("verify", [&] { return verify_canonical(fit.chart, verify_samples, o.fd_step); });
        report["verification"] = report_to_json(vr);
        const auto ints_samples = stage("integrals", [&] {
            return sample_chart(fit.chart, o.integrals_samples, ctx.seed_rng + 2, o.fiber_extent);
        });
        const IntegralsCheck ic =
            stage("integrals", [&] { return check_integrals_of_actions(fit.chart, ints_samples, o.integrals_tol); });
        report["checks"]["canonical"] = {{"residual", vr.canonical_residual},
                                         {"tol", o.canonical_tol},
                                         {"pass", vr.canonical_residual <= o.canonical_tol}};
        report["checks"]["integrals_of_actions"] = {
            {"max_deviation", ic.max_deviation}, {"tol", o.integrals_tol}, {"pass", ic.pass}};
        const bool pass = vr.canonical_residual <= o.canonical_tol && ic.pass;
        return finish(report, ctx, "report.json", pass ? kPass : kCheckFailed);
    });
}

int cmd_emit(const JobConfig& cfg, const RunContext& ctx) {
    Json report = base_report("emit", cfg, ctx);
    return guarded(report, ctx, "emit.json", [&] {
        const JobOptions& o = cfg.options;
        const fs::path chart_path = o.chart_file.empty() ? ctx.out / "chart.json" : fs::path(o.chart_file);
        const Chart chart = stage("load", [&] { return chart_from_json(read_json_file(chart_path.string())); });
        const int n = chart.dof();
        const int m = chart.rank();
        const int nc = n - m;
        fs::create_directories(ctx.out);

        auto header_coords = [&](std::string& h) {
            for (int k = 0; k < n; ++k) h += ",q" + std::to_string(k + 1);
            for (int k = 0; k < n; ++k) h += ",p" + std::to_string(k + 1);
        };
        auto header_chart = [&](std::string& h) {
            for (int k = 0; k < n; ++k) h += ",I" + std::to_string(k + 1);
            for (int a = 0; a < nc; ++a) h += ",x" + std::to_string(a + 1);
            for (int i = 0; i < m; ++i) h += ",phi" + std::to_string(i + 1);
        };
        auto row_vec = [](std::string& r, const Vec& v) {
            for (int k = 0; k < v.size(); ++k) r += "," + csv_num(v[k]);
        };

        // (a) orbit traces
        log(ctx, "orbits");
        std::string orbits = "orbit,t";
        header_coords(orbits);
        header_chart(orbits);
        orbits += "\n";
        stage("orbits", [&] {
            ChartEvaluator ev(chart);
            const Box& box = chart.box();
            for (int c = 0; c < o.orbit_count; ++c) {
                const double f = (c + 1.0) / (o.orbit_count + 1.0);
                const Vec j = box.lo + f * (box.hi - box.lo);
                const FiberFrame frame = chart.frame_at(j);
                Vec dir = m > 0 ? Vec(frame.basis.col(0)) : Vec(o.fiber_extent * chart.complement().col(0));
                for (int k = 0; k < o.orbit_points; ++k) {
                    const double t = m > 0 ? static_cast<double>(k) / o.orbit_points
                                           : static_cast<double>(k) / (o.orbit_points - 1);
                    const Vec z = joint_flow(chart.system(), frame.base, t * dir, chart.options().integrator);
                    const ChartPoint cp = ev.to_action_angle(z);
                    std::string r = std::to_string(c) + "," + csv_num(t);
                    row_vec(r, z);
                    row_vec(r, cp.I);
                    row_vec(r, cp.x);
                    row_vec(r, cp.phi);
                    orbits += r + "\n";
                }
            }
            return 0;
        });
        write_text(ctx.out / "orbits.csv", orbits);

        // (b) residual samples over V x fiber
        log(ctx, "residuals");
        const auto samples =
            stage("residuals", [&] { return sample_chart(chart, o.verify_samples, ctx.seed_rng + 1, o.fiber_extent); });
        const VerificationReport vr = stage("residuals", [&] { return verify_canonical(chart, samples, o.fd_step); });
        std::string res = "sample";
        header_chart(res);
        res += ",residual\n";
        for (std::size_t s = 0; s < samples.size(); ++s) {
            std::string r = std::to_string(s);
            row_vec(r, samples[s].I);
            row_vec(r, samples[s].x);
            row_vec(r, samples[s].phi);
            r += "," + csv_num(vr.sample_residuals[s]);
            res += r + "\n";
        }
        write_text(ctx.out / "residuals.csv", res);

        // (c) action curves along each axis through the box center
        log(ctx, "actions");
        std::string act = "axis";
        for (int k = 0; k < n; ++k) act += ",J" + std::to_string(k + 1);
        for (int k = 0; k < n; ++k) act += ",I" + std::to_string(k + 1);
        act += "\n";
        std::vector<Vec> levels;
        std::vector<int> axis_of;
        for (int a = 0; a < n; ++a)
            for (int k = 0; k < o.action_points; ++k) {
                Vec j = chart.box().center();
                j[a] = chart.box().lo[a] + (chart.box().hi[a] - chart.box().lo[a]) * k / (o.action_points - 1);
                levels.push_back(j);
                axis_of.push_back(a);
            }
        std::vector<Vec> actions(levels.size());
        stage("actions", [&] {
            for_each_index(Execution::parallel, static_cast<long>(levels.size()),
                           [&](long i) { actions[i] = chart.frame_at(levels[i]).actions; });
            return 0;
        });
        for (std::size_t i = 0; i < levels.size(); ++i) {
            std::string r = std::to_string(axis_of[i] + 1);
            row_vec(r, levels[i]);
            row_vec(r, actions[i]);
            act += r + "\n";
        }
        write_text(ctx.out / "actions.csv", act);

        report["files"] = {"orbits.csv", "residuals.csv", "actions.csv"};
        report["rows"] = {{"orbits", o.orbit_count * o.orbit_points},
                          {"residuals", samples.size()},
                          {"actions", levels.size()}};
        report["max_residual"] = vr.canonical_residual;
        return finish(report, ctx, "emit.json", kPass);
    });
}

int cmd_catalog(std::ostream& out) {
    Json list = Json::array();
    for (const auto& e : catalog_list()) {
        Json integrals = Json::array();
        for (const auto& x : e.system.integrals()) integrals.push_back(x.source());
        list.push_back({{"name", e.name},
                        {"dimension", e.system.dof()},
                        {"integrals", integrals},
                        {"box", {{"lo", vec_to_json(e.box.lo)}, {"hi", vec_to_json(e.box.hi)}}},
                        {"seed", vec_to_json(e.seed)},
                        {"rank", e.rank},
                        {"involutive", e.involutive},
                        {"reference", e.reference},
                        {"notes", e.notes}});
    }
    out << list.dump(2) << '\n';
    return kPass;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Action-angle charts around invariant manifolds of integrable systems", "actangle"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed_rng = 1;
    int threads = 0;
    auto add_job = [&](const char* name, const char* help) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "job configuration (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed-rng", seed_rng, "seed for sample placement");
        sub->add_option("--threads", threads, "OpenMP threads (0 keeps the runtime default)")
            ->check(CLI::NonNegativeNumber);
        return sub;
    };
    CLI::App* analyze = add_job("analyze", "check hypotheses, detect and continue the period lattice");
    CLI::App* chart = add_job("chart", "build, gauge-fix and verify the action-angle chart");
    CLI::App* emit = add_job("emit", "write orbit, residual and action CSV files for a stored chart");
    CLI::App* catalog = app.add_subcommand("catalog", "list built-in reference systems");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kPass;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n';
        return kUsageError;
    }

    if (*catalog) return cmd_catalog(out);
    set_thread_count(threads);
    try {
        const JobConfig cfg = parse_config(read_json_file(config_path));
        const RunContext ctx{out_dir, seed_rng, &err};
        if (*analyze) return cmd_analyze(cfg, ctx);
        if (*chart) return cmd_chart(cfg, ctx);
        if (*emit) return cmd_emit(cfg, ctx);
    } catch (const PreconditionError& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kNumericalError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    }
    return kUsageError;
}

}  // namespace actangle
