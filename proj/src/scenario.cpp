#include "wqed/scenario.hpp"

#include "wqed/errors.hpp"
#include "wqed/hash.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace wqed {

using nlohmann::json;

namespace {

std::string_view solver_word(SolverKind k)
{
    switch (k) {
    case SolverKind::Volterra:
        return "volterra";
    case SolverKind::Dde:
        return "dde";
    case SolverKind::Markov:
        return "markov";
    case SolverKind::Oracle:
        return "oracle";
    }
    return "volterra";
}

StateKind state_kind_from(std::string_view s)
{
    if (s == "single_atom")
        return StateKind::SingleAtom;
    if (s == "timed_dicke")
        return StateKind::TimedDicke;
    if (s == "subradiant")
        return StateKind::Subradiant;
    throw ConfigError("initial.type must be one of single_atom, timed_dicke, subradiant; got \"" + std::string(s) + "\"");
}

std::string_view origin_word(PhaseOrigin o) { return o == PhaseOrigin::VirtualSite ? "virtual_site" : "first_atom"; }

PhaseOrigin origin_from(std::string_view s)
{
    if (s == "virtual_site")
        return PhaseOrigin::VirtualSite;
    if (s == "first_atom")
        return PhaseOrigin::FirstAtom;
    throw ConfigError("initial.phase_origin must be virtual_site or first_atom");
}

std::string format_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

// Typed accessors that name the offending field.
double number(const json& j, const std::string& field)
{
    if (!j.is_number())
        throw ConfigError(field + " must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v))
        throw ConfigError(field + " must be finite");
    return v;
}

std::size_t count(const json& j, const std::string& field)
{
    if (!j.is_number_integer() && !(j.is_number() && std::floor(j.get<double>()) == j.get<double>()))
        throw ConfigError(field + " must be an integer");
    const double v = j.get<double>();
    if (v < 0)
        throw ConfigError(field + " must be >= 0");
    return static_cast<std::size_t>(v);
}

std::string text(const json& j, const std::string& field)
{
    if (!j.is_string())
        throw ConfigError(field + " must be a string");
    return j.get<std::string>();
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw ConfigError("unknown key \"" + where + key + "\"");
}

const std::set<std::string> kKeys = {"preset",    "name",       "model",           "gamma_ratio", "cutoff",
                                     "N",         "spacing_over_pi", "positions", "initial",     "dt",
                                     "t_max",     "solvers",    "smoothing_window", "seedless",   "out_dir",
                                     "plot_window", "companions"};
const std::set<std::string> kInitialKeys = {"type", "k_over_k0", "atom_index", "phase_origin"};

Scenario from_json(const json& doc);

void apply(Scenario& s, const json& doc)
{
    if (doc.contains("name"))
        s.name = text(doc["name"], "name");
    if (doc.contains("model"))
        s.model.kind = coupling_kind_from_string(text(doc["model"], "model"));
    if (doc.contains("gamma_ratio")) {
        const json& g = doc["gamma_ratio"];
        s.gamma_ratios.clear();
        if (g.is_array()) {
            for (std::size_t k = 0; k < g.size(); ++k)
                s.gamma_ratios.push_back(number(g[k], "gamma_ratio[" + std::to_string(k) + "]"));
        } else {
            s.gamma_ratios.push_back(number(g, "gamma_ratio"));
        }
    }
    if (doc.contains("cutoff"))
        s.cutoff = number(doc["cutoff"], "cutoff");
    if (doc.contains("N")) {
        s.n_atoms = count(doc["N"], "N");
        if (!doc.contains("positions"))
            s.positions.clear();
    }
    if (doc.contains("spacing_over_pi")) {
        s.spacing_over_pi = number(doc["spacing_over_pi"], "spacing_over_pi");
        if (!doc.contains("positions"))
            s.positions.clear();
    }
    if (doc.contains("positions")) {
        const json& p = doc["positions"];
        if (!p.is_array())
            throw ConfigError("positions must be a list of numbers");
        s.positions.clear();
        for (std::size_t k = 0; k < p.size(); ++k)
            s.positions.push_back(number(p[k], "positions[" + std::to_string(k) + "]"));
        if (!doc.contains("N"))
            s.n_atoms = s.positions.size();
    }
    if (doc.contains("initial")) {
        const json& in = doc["initial"];
        if (!in.is_object())
            throw ConfigError("initial must be an object");
        reject_unknown(in, kInitialKeys, "initial.");
        if (in.contains("type"))
            s.initial.type = state_kind_from(text(in["type"], "initial.type"));
        if (in.contains("k_over_k0"))
            s.initial.k_over_k0 = number(in["k_over_k0"], "initial.k_over_k0");
        if (in.contains("atom_index"))
            s.initial.atom_index = count(in["atom_index"], "initial.atom_index");
        if (in.contains("phase_origin"))
            s.initial.phase_origin = origin_from(text(in["phase_origin"], "initial.phase_origin"));
    }
    if (doc.contains("dt"))
        s.dt = number(doc["dt"], "dt");
    if (doc.contains("t_max"))
        s.t_max = number(doc["t_max"], "t_max");
    if (doc.contains("solvers")) {
        const json& v = doc["solvers"];
        if (!v.is_array())
            throw ConfigError("solvers must be a list");
        s.solvers.clear();
        for (std::size_t k = 0; k < v.size(); ++k)
            s.solvers.push_back(SolverRequest::parse(text(v[k], "solvers[" + std::to_string(k) + "]")));
    }
    if (doc.contains("smoothing_window"))
        s.smoothing_window = count(doc["smoothing_window"], "smoothing_window");
    if (doc.contains("seedless")) {
        if (!doc["seedless"].is_boolean() || !doc["seedless"].get<bool>())
            throw ConfigError("seedless must be true (runs are always deterministic)");
    }
    if (doc.contains("out_dir"))
        s.out_dir = text(doc["out_dir"], "out_dir");
    if (doc.contains("plot_window")) {
        const json& w = doc["plot_window"];
        if (!w.is_array() || w.size() != 2)
            throw ConfigError("plot_window must be [t_min, t_max]");
        s.plot_window = std::make_pair(number(w[0], "plot_window[0]"), number(w[1], "plot_window[1]"));
    }
    if (doc.contains("companions")) {
        const json& c = doc["companions"];
        if (!c.is_array())
            throw ConfigError("companions must be a list of scenario objects");
        s.companions.clear();
        for (const json& e : c)
            s.companions.push_back(from_json(e));
    }
}

Scenario from_json(const json& doc)
{
    if (!doc.is_object())
        throw ConfigError("scenario document must be a JSON object");
    reject_unknown(doc, kKeys, "");
    Scenario s;
    if (doc.contains("preset"))
        s = preset(text(doc["preset"], "preset"));
    apply(s, doc);
    return s;
}

json to_json(const Scenario& s)
{
    json j;
    j["name"] = s.name;
    j["model"] = std::string(to_string(s.model.kind));
    if (s.gamma_ratios.size() == 1)
        j["gamma_ratio"] = s.gamma_ratios.front();
    else
        j["gamma_ratio"] = s.gamma_ratios;
    j["cutoff"] = s.cutoff;
    j["N"] = s.n_atoms;
    if (s.spacing_over_pi)
        j["spacing_over_pi"] = *s.spacing_over_pi;
    if (!s.positions.empty())
        j["positions"] = s.positions;
    j["initial"] = {{"type", std::string(to_string(s.initial.type))},
                    {"k_over_k0", s.initial.k_over_k0},
                    {"atom_index", s.initial.atom_index},
                    {"phase_origin", std::string(origin_word(s.initial.phase_origin))}};
    j["dt"] = s.dt;
    j["t_max"] = s.t_max;
    json solvers = json::array();
    for (const auto& r : s.solvers)
        solvers.push_back(r.name());
    j["solvers"] = solvers;
    j["smoothing_window"] = s.smoothing_window;
    j["seedless"] = true;
    if (!s.out_dir.empty())
        j["out_dir"] = s.out_dir;
    if (s.plot_window)
        j["plot_window"] = {s.plot_window->first, s.plot_window->second};
    if (!s.companions.empty()) {
        json c = json::array();
        for (const auto& e : s.companions)
            c.push_back(to_json(e));
        j["companions"] = c;
    }
    return j;
}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte)
{
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k + 1 < byte && k < text.size(); ++k) {
        if (text[k] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

} // namespace

std::string SolverRequest::name() const
{
    std::string n(solver_word(kind));
    if (model)
        n += "-" + std::string(to_string(*model));
    return n;
}

SolverRequest SolverRequest::parse(std::string_view name)
{
    const std::string s(name);
    SolverRequest r;
    std::string head = s;
    std::string tail;
    if (auto dash = s.find('-'); dash != std::string::npos) {
        head = s.substr(0, dash);
        tail = s.substr(dash + 1);
    }
    if (head == "volterra")
        r.kind = SolverKind::Volterra;
    else if (head == "dde")
        r.kind = SolverKind::Dde;
    else if (head == "markov")
        r.kind = SolverKind::Markov;
    else if (head == "oracle")
        r.kind = SolverKind::Oracle;
    else
        throw ConfigError("unknown solver \"" + s + "\" (volterra[-constant|-linear], dde, markov, oracle[-constant|-linear])");
    if (!tail.empty()) {
        if (r.kind == SolverKind::Dde || r.kind == SolverKind::Markov)
            throw ConfigError("solver \"" + s + "\" takes no coupling model");
        try {
            r.model = coupling_kind_from_string(tail);
        } catch (const ConfigError&) {
            throw ConfigError("unknown solver \"" + s + "\"");
        }
    }
    return r;
}

ChainGeometry Scenario::geometry() const
{
    if (!positions.empty())
        return ChainGeometry(positions);
    if (n_atoms <= 1)
        return ChainGeometry::uniform(1, 0.0);
    if (!spacing_over_pi)
        throw ConfigError("spacing_over_pi (or positions) is required for N > 1");
    return ChainGeometry::uniform(n_atoms, *spacing_over_pi * std::numbers::pi);
}

void validate(const Scenario& s)
{
    if (s.gamma_ratios.empty())
        throw ConfigError("gamma_ratio must be > 0");
    for (double g : s.gamma_ratios)
        if (!(g > 0.0) || !std::isfinite(g))
            throw ConfigError("gamma_ratio must be > 0");
    if (!(s.cutoff > 1.0) || !std::isfinite(s.cutoff))
        throw ConfigError("cutoff must be > 1");
    if (s.n_atoms < 1 || s.n_atoms > 1000)
        throw ConfigError("N must be in 1..1000");
    if (!s.positions.empty() && s.positions.size() != s.n_atoms)
        throw ConfigError("positions must list N = " + std::to_string(s.n_atoms) + " values");
    if (s.positions.empty() && s.n_atoms > 1 && !(s.spacing_over_pi && *s.spacing_over_pi > 0.0))
        throw ConfigError("spacing_over_pi must be > 0 for N > 1");
    const ChainGeometry g = s.geometry();
    if (s.initial.type == StateKind::SingleAtom && (s.initial.atom_index < 1 || s.initial.atom_index > s.n_atoms))
        throw ConfigError("initial.atom_index must be in 1.." + std::to_string(s.n_atoms));
    if (s.initial.type == StateKind::Subradiant) {
        if (s.n_atoms < 2)
            throw ConfigError("initial.type subradiant needs N >= 2");
        if (!g.uniform_spacing())
            throw ConfigError("initial.type subradiant needs a uniform chain");
    }
    if (!(s.dt > 0.0))
        throw ConfigError("dt must be > 0");
    if (!(s.t_max > 0.0))
        throw ConfigError("t_max must be > 0");
    if (s.t_max / s.dt > 2e6)
        throw ConfigError("t_max / dt must not exceed 2e6 steps");
    if (s.solvers.empty())
        throw ConfigError("solvers must list at least one of volterra, dde, markov, oracle");
    for (const auto& r : s.solvers)
        if (r.kind == SolverKind::Oracle && s.cutoff > 200.0)
            throw ConfigError("solver oracle needs cutoff <= 200 (mode discretization cost)");
    if (s.smoothing_window < 1 || s.smoothing_window % 2 == 0)
        throw ConfigError("smoothing_window must be odd and >= 1");
    if (s.plot_window && !(s.plot_window->first < s.plot_window->second))
        throw ConfigError("plot_window must satisfy t_min < t_max");
    for (const auto& c : s.companions) {
        if (!c.companions.empty())
            throw ConfigError("companions cannot be nested");
        validate(c);
    }
}

Scenario parse_scenario(std::string_view text)
{
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte);
        std::string why = e.what();
        if (auto c = why.find("column"); c != std::string::npos && why.find(": ", c) != std::string::npos)
            why = why.substr(why.find(": ", c) + 2);
        throw ConfigError("parse error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                          why);
    }
    Scenario s = from_json(doc);
    validate(s);
    return s;
}

Scenario load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read scenario file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

std::string serialize_scenario(const Scenario& s) { return to_json(s).dump(2) + "\n"; }

std::string scenario_hash(const Scenario& s)
{
    Scenario canonical = s;
    canonical.out_dir.clear(); // where results go does not change them
    return Fnv1a().text(serialize_scenario(canonical)).text(kCodeVersion).hex();
}

// --- presets ---------------------------------------------------------------

namespace {

SolverRequest volterra(CouplingKind k) { return {SolverKind::Volterra, k}; }

Scenario chain(std::string name, std::size_t n, double spacing_over_pi, double t_max)
{
    Scenario s;
    s.name = std::move(name);
    s.n_atoms = n;
    s.spacing_over_pi = spacing_over_pi;
    s.initial.type = StateKind::TimedDicke;
    s.initial.k_over_k0 = 1.0;
    s.t_max = t_max;
    s.solvers = {volterra(CouplingKind::Constant), volterra(CouplingKind::Linear), {SolverKind::Dde, {}}};
    return s;
}

Scenario single_atom_setup(std::string name, std::vector<double> gammas, std::vector<SolverRequest> solvers)
{
    Scenario s;
    s.name = std::move(name);
    s.n_atoms = 1;
    s.gamma_ratios = std::move(gammas);
    s.initial.type = StateKind::SingleAtom;
    s.initial.atom_index = 1;
    s.t_max = 50.0;
    s.solvers = std::move(solvers);
    return s;
}

} // namespace

const std::vector<std::string>& preset_names()
{
    static const std::vector<std::string> names = {"fig1bc", "fig2ab", "fig2cd", "fig2e", "fig3", "spfig"};
    return names;
}

std::string canonical_preset_name(std::string_view name)
{
    const std::string n(name);
    for (const auto& p : preset_names())
        if (n == p)
            return p;
    if (n == "fig1b" || n == "fig1c")
        return "fig1bc";
    if (n == "fig2a" || n == "fig2b")
        return "fig2ab";
    if (n == "fig2c" || n == "fig2d")
        return "fig2cd";
    if (n == "fig3a" || n == "fig3b")
        return "fig3";
    throw ConfigError("unknown preset \"" + n + "\" (fig1bc, fig2ab, fig2cd, fig2e, fig3, spfig)");
}

Scenario preset(std::string_view name)
{
    const std::string p = canonical_preset_name(name);
    const std::vector<double> three{1e-2, 1e-3, 1e-6};
    Scenario s;
    if (p == "fig1bc") {
        s = single_atom_setup("fig1bc", three,
                              {volterra(CouplingKind::Constant), volterra(CouplingKind::Linear)});
    } else if (p == "fig2ab") {
        s = chain("fig2ab", 20, 0.1, 10.0);
    } else if (p == "fig2cd") {
        s = chain("fig2cd", 10, 0.1, 50.0);
        s.gamma_ratios = three;
    } else if (p == "fig2e") {
        s = chain("fig2e", 10, 0.1, 50.0);
        s.gamma_ratios = three;
        s.plot_window = std::make_pair(45.0, 50.0);
        s.companions.push_back(single_atom_setup(
            "fig2e-single", three,
            {volterra(CouplingKind::Constant), volterra(CouplingKind::Linear), {SolverKind::Markov, {}}}));
        s.companions.back().plot_window = s.plot_window;
    } else if (p == "fig3") {
        s = chain("fig3", 20, 0.1, 10.0);
        s.initial.type = StateKind::Subradiant;
    } else if (p == "spfig") {
        s = chain("spfig", 10, 0.5, 10.0);
    }
    if (p != "fig1bc" && p != "fig2cd" && p != "fig2e")
        s.gamma_ratios = {1e-4};
    s.cutoff = 1e4;
    s.dt = 0.005;
    return s;
}

// --- run expansion ---------------------------------------------------------

std::string RunSpec::solver_tag() const
{
    SolverRequest r = solver;
    if (r.kind == SolverKind::Volterra || r.kind == SolverKind::Oracle)
        r.model = r.model.value_or(model.kind);
    return r.name();
}

namespace {

InitialState make_initial(const InitialSpec& spec, const ChainGeometry& g)
{
    switch (spec.type) {
    case StateKind::SingleAtom:
        return single_atom(g, spec.atom_index - 1);
    case StateKind::TimedDicke:
        return timed_dicke(g, spec.k_over_k0);
    case StateKind::Subradiant:
        return subradiant_state(g, spec.phase_origin);
    case StateKind::Custom:
        break;
    }
    throw ConfigError("initial.type custom is not available from a scenario document");
}

void expand_into(const Scenario& s, std::size_t setup, std::vector<RunSpec>& out)
{
    const ChainGeometry g = s.geometry();
    const InitialState init = make_initial(s.initial, g);
    for (double gamma : s.gamma_ratios) {
        for (const auto& solver : s.solvers) {
            RunSpec r;
            r.label = (setup ? "c" + std::to_string(setup) + "_" : std::string()) + "N" + std::to_string(s.n_atoms) + "_g" + format_number(gamma);
            r.setup = setup;
            r.model = s.model;
            if (solver.model)
                r.model.kind = *solver.model;
            r.params = {gamma, s.cutoff};
            r.geometry = g;
            r.initial = init;
            r.grid = s.grid();
            r.solver = solver;
            r.smoothing_window = s.smoothing_window;
            out.push_back(std::move(r));
        }
    }
}

} // namespace

std::vector<RunSpec> expand_runs(const Scenario& s)
{
    validate(s);
    std::vector<RunSpec> out;
    expand_into(s, 0, out);
    for (std::size_t k = 0; k < s.companions.size(); ++k)
        expand_into(s.companions[k], k + 1, out);
    return out;
}

} // namespace wqed
