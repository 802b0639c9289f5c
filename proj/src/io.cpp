#include "actangle/io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "actangle/error.hpp"

namespace actangle {

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw PreconditionError(where + " must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw PreconditionError("unknown key '" + key + "' in " + where);
}

template <class T>
void read(const Json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

Json get(const Json& j, const char* key) {
    if (!j.contains(key)) throw PreconditionError(std::string("chart document is missing '") + key + "'");
    return j.at(key);
}

}  // namespace

Json vec_to_json(const Vec& v) {
    Json a = Json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Vec vec_from_json(const Json& j) {
    if (!j.is_array()) throw PreconditionError("expected a numeric array");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw PreconditionError("expected a numeric array");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

Json mat_to_json(const Mat& m) {
    Json cols = Json::array();
    for (int c = 0; c < m.cols(); ++c) cols.push_back(vec_to_json(m.col(c)));
    return {{"rows", m.rows()}, {"columns", cols}};
}

Mat mat_from_json(const Json& j) {
    const int rows = j.at("rows").get<int>();
    const Json& cols = j.at("columns");
    Mat m(rows, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const Vec v = vec_from_json(cols[c]);
        if (v.size() != rows) throw PreconditionError("matrix column has wrong length");
        m.col(static_cast<Eigen::Index>(c)) = v;
    }
    return m;
}

Json options_to_json(const ChartOptions& o) {
    Json j;
    j["rtol"] = o.integrator.rtol;
    j["atol"] = o.integrator.atol;
    j["max_steps"] = o.integrator.max_steps;
    j["escape_half_width"] = o.integrator.box_half_width;
    if (o.integrator.box_lo.size()) {
        j["escape_lo"] = vec_to_json(o.integrator.box_lo);
        j["escape_hi"] = vec_to_json(o.integrator.box_hi);
    }
    j["s_max"] = o.search.s_max;
    j["grid_step"] = o.search.grid_step;
    j["max_grid_points"] = o.search.max_grid_points;
    j["max_refinements"] = o.search.max_refinements;
    j["section_resolution"] = o.section.resolution;
    j["section_tol"] = o.section.tol;
    j["section_max_newton"] = o.section.max_newton;
    j["lattice_tol"] = o.lattice_tol;
    j["involution_tol"] = o.involution_tol;
    j["regularity_tol"] = o.regularity_tol;
    j["domain_slack"] = o.domain_slack;
    j["angle_seeds"] = o.angle_seeds;
    if (o.complement) j["complement"] = mat_to_json(*o.complement);
    return j;
}

ChartOptions options_from_json(const Json& j) {
    reject_unknown(j,
                   {"rtol", "atol", "max_steps", "escape_half_width", "escape_lo", "escape_hi", "s_max", "grid_step",
                    "max_grid_points", "max_refinements", "section_resolution", "section_tol",
                    "section_max_newton", "lattice_tol", "involution_tol", "regularity_tol", "domain_slack",
                    "angle_seeds", "complement"},
                   "chart options");
    ChartOptions o;
    read(j, "rtol", o.integrator.rtol);
    read(j, "atol", o.integrator.atol);
    read(j, "max_steps", o.integrator.max_steps);
    read(j, "escape_half_width", o.integrator.box_half_width);
    if (j.contains("escape_lo") != j.contains("escape_hi"))
        throw PreconditionError("escape_lo and escape_hi must be given together");
    if (j.contains("escape_lo")) {
        o.integrator.box_lo = vec_from_json(j.at("escape_lo"));
        o.integrator.box_hi = vec_from_json(j.at("escape_hi"));
    }
    read(j, "s_max", o.search.s_max);
    read(j, "grid_step", o.search.grid_step);
    read(j, "max_grid_points", o.search.max_grid_points);
    read(j, "max_refinements", o.search.max_refinements);
    read(j, "section_resolution", o.section.resolution);
    read(j, "section_tol", o.section.tol);
    read(j, "section_max_newton", o.section.max_newton);
    read(j, "lattice_tol", o.lattice_tol);
    read(j, "involution_tol", o.involution_tol);
    read(j, "regularity_tol", o.regularity_tol);
    read(j, "domain_slack", o.domain_slack);
    read(j, "angle_seeds", o.angle_seeds);
    if (j.contains("complement")) o.complement = mat_from_json(j.at("complement"));
    o.section.regularity_tol = o.regularity_tol;
    return o;
}

Json coverage_to_json(const SearchCoverage& c) {
    return {{"s_max", c.s_max},           {"grid_step", c.grid_step}, {"grid_points", c.grid_points},
            {"candidates", c.candidates}, {"refined", c.refined},     {"accepted", c.accepted},
            {"returns_found", c.returns_found}, {"strategy", c.strategy}};
}

Json lattice_to_json(const PeriodLattice& l) {
    return {{"rank", l.rank},
            {"basis", mat_to_json(l.basis)},
            {"complement", mat_to_json(l.complement)},
            {"noncompact_axes", l.noncompact_axes},
            {"base_point", vec_to_json(l.base_point)},
            {"residuals", vec_to_json(l.residuals)},
            {"coverage", coverage_to_json(l.coverage)}};
}

Json report_to_json(const VerificationReport& r) {
    Json loc = Json::array();
    for (const auto& c : r.locations)
        loc.push_back({{"I", vec_to_json(c.I)}, {"x", vec_to_json(c.x)}, {"phi", vec_to_json(c.phi)}});
    Json out = {{"fd_step", r.fd_step},
                {"samples", r.samples},
                {"canonical_residual", r.canonical_residual},
                {"brackets",
                 {{"action_action", r.bracket_action_action},
                  {"angle_action", r.bracket_angle_action},
                  {"line_action", r.bracket_line_action},
                  {"line_angle", r.bracket_line_angle},
                  {"angle_angle", r.bracket_angle_angle},
                  {"line_line", r.bracket_line_line}}},
                {"structure",
                 {{"line_block_residual", r.line_block_residual},
                  {"mixed_block", r.mixed_block},
                  {"compact_block_sigma_min", r.compact_block_sigma_min}}},
                {"sample_residuals", r.sample_residuals},
                {"locations", loc}};
    return out;
}

Json fit_report_to_json(const GaugeFitReport& r) {
    return {{"degree", r.degree},
            {"samples", r.samples},
            {"skew_rows", r.skew_rows},
            {"skew_unknowns", r.skew_unknowns},
            {"shift_rows", r.shift_rows},
            {"shift_unknowns", r.shift_unknowns},
            {"pre_residual", r.pre_residual},
            {"post_residual", r.post_residual},
            {"max_coefficient", r.max_coefficient}};
}

Json chart_to_json(const Chart& chart) {
    const IntegrableSystem& sys = chart.system();
    Json integrals = Json::array();
    for (const auto& e : sys.integrals()) integrals.push_back(e.source());
    const Section::Data sd = chart.section().data();
    Json points = Json::array(), mus = Json::array();
    for (const Vec& v : sd.node_points) points.push_back(vec_to_json(v));
    for (const Vec& v : sd.node_mu) mus.push_back(vec_to_json(v));
    Json bases = Json::array(), actions = Json::array();
    for (const Mat& b : chart.node_bases()) bases.push_back(mat_to_json(b));
    for (const Vec& a : chart.node_actions()) actions.push_back(vec_to_json(a));
    const GaugeCorrection& g = chart.gauge();
    auto coeffs = [](const std::vector<Vec>& v) {
        Json a = Json::array();
        for (const Vec& c : v) a.push_back(vec_to_json(c));
        return a;
    };
    Json j;
    j["format"] = "actangle-chart";
    j["version"] = kChartFormatVersion;
    j["convention"] = kConventionTag;
    j["system"] = {{"name", sys.name()}, {"dimension", sys.dof()}, {"integrals", integrals}};
    j["box"] = {{"lo", vec_to_json(chart.box().lo)}, {"hi", vec_to_json(chart.box().hi)}};
    j["options"] = options_to_json(chart.options());
    j["section"] = {{"seed", vec_to_json(sd.seed)},       {"resolution", sd.resolution},
                    {"node_points", points},              {"slice_coordinates", mus},
                    {"fill_order", sd.fill_order},        {"parents", sd.parents}};
    j["lattice"] = {{"rank", chart.rank()},
                    {"noncompact_axes", chart.noncompact_axes()},
                    {"complement", mat_to_json(chart.complement())},
                    {"node_bases", bases},
                    {"seed", lattice_to_json(chart.seed_lattice())}};
    j["actions"] = actions;
    j["gauge"] = {{"degree", g.basis.degree()},
                  {"D", coeffs(g.d)},
                  {"Dprime", coeffs(g.dprime)},
                  {"B", coeffs(g.b)}};
    return j;
}

Chart chart_from_json(const Json& j) {
    try {
        reject_unknown(j, {"format", "version", "convention", "system", "box", "options", "section", "lattice",
                           "actions", "gauge"},
                       "chart document");
        if (get(j, "format") != "actangle-chart") throw PreconditionError("not a chart document");
        if (get(j, "version").get<int>() != kChartFormatVersion)
            throw PreconditionError("unsupported chart format version " + get(j, "version").dump());
        if (get(j, "convention").get<std::string>() != kConventionTag)
            throw PreconditionError("chart was written with a different sign convention");
        const Json& js = get(j, "system");
        std::vector<std::string> sources = js.at("integrals").get<std::vector<std::string>>();
        const IntegrableSystem sys =
            IntegrableSystem::from_sources(js.at("dimension").get<int>(), sources, js.at("name").get<std::string>());
        const Json& jb = get(j, "box");
        const Box box(vec_from_json(jb.at("lo")), vec_from_json(jb.at("hi")));
        const ChartOptions opts = options_from_json(get(j, "options"));

        const Json& jsec = get(j, "section");
        Section::Data sd;
        sd.seed = vec_from_json(jsec.at("seed"));
        sd.resolution = jsec.at("resolution").get<int>();
        for (const auto& v : jsec.at("node_points")) sd.node_points.push_back(vec_from_json(v));
        for (const auto& v : jsec.at("slice_coordinates")) sd.node_mu.push_back(vec_from_json(v));
        sd.fill_order = jsec.at("fill_order").get<std::vector<int>>();
        sd.parents = jsec.at("parents").get<std::vector<int>>();
        Section section = Section::restore(sys, box, std::move(sd), opts.section);

        const Json& jl = get(j, "lattice");
        std::vector<Mat> bases;
        for (const auto& b : jl.at("node_bases")) bases.push_back(mat_from_json(b));
        std::vector<Vec> actions;
        for (const auto& a : get(j, "actions")) actions.push_back(vec_from_json(a));
        const Json& jsl = jl.at("seed");
        PeriodLattice seed;
        seed.rank = jsl.at("rank").get<int>();
        seed.basis = mat_from_json(jsl.at("basis"));
        seed.complement = mat_from_json(jsl.at("complement"));
        seed.noncompact_axes = jsl.at("noncompact_axes").get<std::vector<int>>();
        seed.base_point = vec_from_json(jsl.at("base_point"));
        seed.residuals = vec_from_json(jsl.at("residuals"));
        const Json& cov = jsl.at("coverage");
        seed.coverage = {cov.at("s_max").get<double>(),     cov.at("grid_step").get<double>(),
                         cov.at("grid_points").get<long>(), cov.at("candidates").get<int>(),
                         cov.at("refined").get<int>(),      cov.at("accepted").get<int>(),
                         cov.at("returns_found").get<bool>(), cov.at("strategy").get<std::string>()};

        const Json& jg = get(j, "gauge");
        const std::vector<int> axes = jl.at("noncompact_axes").get<std::vector<int>>();
        const int nc = static_cast<int>(axes.size());
        const int m = sys.dof() - nc;
        if (jl.at("rank").get<int>() != m) throw PreconditionError("lattice rank disagrees with the axis split");
        GaugeCorrection g = GaugeCorrection::zero(box, jg.at("degree").get<int>(), nc, m);
        auto fill = [&](const char* key, std::vector<Vec>& out) {
            const Json& a = jg.at(key);
            if (a.size() != out.size()) throw PreconditionError(std::string("gauge block ") + key + " has wrong size");
            for (std::size_t i = 0; i < out.size(); ++i) {
                out[i] = vec_from_json(a[i]);
                if (out[i].size() != g.basis.size())
                    throw PreconditionError(std::string("gauge block ") + key + " has wrong degree");
            }
        };
        fill("D", g.d);
        fill("Dprime", g.dprime);
        fill("B", g.b);
        return Chart::restore(sys, std::move(section), opts, axes, mat_from_json(jl.at("complement")),
                              std::move(bases), std::move(actions), std::move(g), std::move(seed));
    } catch (const Json::exception& e) {
        throw PreconditionError(std::string("malformed chart document: ") + e.what());
    }
}

void write_json_file(const std::string& path, const Json& j) {
    std::ofstream f(path);
    if (!f) throw PreconditionError("cannot write " + path);
    f << j.dump(2) << '\n';
    if (!f) throw PreconditionError("failed writing " + path);
}

Json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw PreconditionError("cannot read " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    try {
        return Json::parse(ss.str());
    } catch (const Json::parse_error& e) {
        throw PreconditionError("invalid JSON in " + path + ": " + e.what());
    }
}

}  // namespace actangle
