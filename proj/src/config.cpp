#include "stefan/config.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace stefan {

namespace {

struct KeyInfo {
    const char* key;
    double cm_to_si; // factor applied to a cm-unit value, 1 when unit free
};

// Canonical order, also the render order.
constexpr std::array key_table{
    KeyInfo{"schema_version", 1.0},
    KeyInfo{"units", 1.0},
    KeyInfo{"model.order", 1.0},
    KeyInfo{"model.alpha", 1e-4},
    KeyInfo{"model.beta", 1e-4},
    KeyInfo{"model.k_cond", 1e2},
    KeyInfo{"model.t_melt", 1.0},
    KeyInfo{"model.length", 1e-2},
    KeyInfo{"model.eps", 1.0},
    KeyInfo{"model.eps2", 1.0},
    KeyInfo{"initial.s0", 1e-2},
    KeyInfo{"initial.v0", 1e-2},
    KeyInfo{"initial.a0", 1e-2},
    KeyInfo{"initial.profile", 1.0},
    KeyInfo{"initial.surplus", 1.0},
    KeyInfo{"initial.samples", 1.0},
    KeyInfo{"controller.mode", 1.0},
    KeyInfo{"controller.c1", 1.0},
    KeyInfo{"controller.c2", 1.0},
    KeyInfo{"controller.c3", 1.0},
    KeyInfo{"controller.setpoint", 1e-2},
    KeyInfo{"controller.relaxation", 1.0},
    KeyInfo{"controller.schedule", 1.0},
    KeyInfo{"solver.nx", 1.0},
    KeyInfo{"solver.dt", 1.0},
    KeyInfo{"solver.t_final", 1.0},
    KeyInfo{"solver.scheme", 1.0},
    KeyInfo{"solver.flux_stencil", 1.0},
    KeyInfo{"solver.corrector_passes", 1.0},
    KeyInfo{"solver.startup_mesh_ratio", 1.0},
    KeyInfo{"tolerances.bc", 1.0},
    KeyInfo{"tolerances.temp", 1.0},
    KeyInfo{"tolerances.mono", 1e-2},
    KeyInfo{"tolerances.grad", 1e2},
    KeyInfo{"tolerances.qc_rel", 1.0},
    KeyInfo{"tolerances.s_bound", 1e-2},
    KeyInfo{"tolerances.lyap", 1.0},
    KeyInfo{"output.directory", 1.0},
    KeyInfo{"output.record_every", 1.0},
};

constexpr double schedule_qc_cm_to_si = 1e4; // W/cm^2 -> W/m^2

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void fail(const std::string& key, int line, const std::string& message)
{
    std::ostringstream os;
    if (line > 0) {
        os << "line " << line << ": ";
    }
    if (!key.empty()) {
        os << key << ": ";
    }
    os << message;
    throw ConfigError(os.str());
}

double parse_double(const std::string& text, const std::string& key, int line)
{
    double value = 0.0;
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end || text.empty()) {
        fail(key, line, "expected a number, got '" + text + "'");
    }
    if (!std::isfinite(value)) {
        fail(key, line, "value must be finite");
    }
    return value;
}

int parse_int(const std::string& text, const std::string& key, int line)
{
    int value = 0;
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end || text.empty()) {
        fail(key, line, "expected an integer, got '" + text + "'");
    }
    return value;
}

std::vector<std::pair<double, double>> parse_pairs(const std::string& text, const std::string& key, int line)
{
    std::vector<std::pair<double, double>> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            fail(key, line, "expected 'a:b' pairs separated by commas, got '" + item + "'");
        }
        out.emplace_back(parse_double(trim(item.substr(0, colon)), key, line),
                         parse_double(trim(item.substr(colon + 1)), key, line));
    }
    if (out.empty()) {
        fail(key, line, "empty list");
    }
    return out;
}

std::string render_pairs(const std::vector<std::pair<double, double>>& pairs)
{
    std::string out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (i > 0) {
            out += ", ";
        }
        out += format_double(pairs[i].first) + ":" + format_double(pairs[i].second);
    }
    return out;
}

double scale_of(const std::string& key)
{
    for (const auto& entry : key_table) {
        if (key == entry.key) {
            return entry.cm_to_si;
        }
    }
    return 1.0;
}

class Reader {
public:
    explicit Reader(const ConfigEntries& entries) : entries_(entries) {}

    bool has(const std::string& key) const { return entries_.values.count(key) > 0; }

    const ConfigEntries::Entry& entry(const std::string& key) const
    {
        const auto it = entries_.values.find(key);
        if (it == entries_.values.end()) {
            fail(key, 0, "required key is missing");
        }
        return it->second;
    }

    double number(const std::string& key) const
    {
        const auto& e = entry(key);
        return parse_double(e.value, key, e.line);
    }

    std::optional<double> optional_number(const std::string& key) const
    {
        if (!has(key)) {
            return std::nullopt;
        }
        return number(key);
    }

    double number_or(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

    int integer_or(const std::string& key, int fallback) const
    {
        if (!has(key)) {
            return fallback;
        }
        const auto& e = entry(key);
        return parse_int(e.value, key, e.line);
    }

    std::string word_or(const std::string& key, const std::string& fallback) const
    {
        return has(key) ? entry(key).value : fallback;
    }

    std::vector<std::pair<double, double>> pairs(const std::string& key) const
    {
        const auto& e = entry(key);
        return parse_pairs(e.value, key, e.line);
    }

    void forbid(const std::string& key, const std::string& why) const
    {
        if (has(key)) {
            fail(key, entry(key).line, why);
        }
    }

    [[noreturn]] void bad_choice(const std::string& key, const std::string& allowed) const
    {
        fail(key, entry(key).line, "expected one of " + allowed + ", got '" + entry(key).value + "'");
    }

private:
    const ConfigEntries& entries_;
};

} // namespace

std::string format_double(double value)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

const char* to_string(UnitSystem units)
{
    return units == UnitSystem::SI ? "si" : "cm";
}

const char* to_string(SetpointRelaxation relaxation)
{
    switch (relaxation) {
    case SetpointRelaxation::Eps1:
        return "eps1";
    case SetpointRelaxation::Eps2:
        return "eps2";
    case SetpointRelaxation::Sum:
        return "sum";
    }
    return "?";
}

bool is_known_key(const std::string& key)
{
    return std::any_of(key_table.begin(), key_table.end(), [&](const KeyInfo& s) { return key == s.key; });
}

void ConfigEntries::set(const std::string& key, const std::string& value)
{
    if (!is_known_key(key)) {
        fail(key, 0, "unknown key");
    }
    values[key] = Entry{value, 0};
}

ConfigEntries parse_entries(std::string_view text)
{
    static const std::set<std::string> sections{"model", "initial", "controller", "solver", "tolerances", "output"};
    ConfigEntries entries;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (body.empty()) {
            continue;
        }
        if (body.front() == '[') {
            if (body.back() != ']') {
                fail("", line, "malformed section header '" + body + "'");
            }
            section = trim(body.substr(1, body.size() - 2));
            if (sections.count(section) == 0) {
                fail("", line, "unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            fail("", line, "expected 'key = value', got '" + body + "'");
        }
        const std::string name = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        const std::string key = section.empty() ? name : section + "." + name;
        if (name.empty() || !is_known_key(key)) {
            fail(key, line, "unknown key");
        }
        if (value.empty()) {
            fail(key, line, "missing value");
        }
        if (!entries.values.emplace(key, ConfigEntries::Entry{value, line}).second) {
            fail(key, line, "duplicate key (first set on line " + std::to_string(entries.values[key].line) + ")");
        }
    }
    return entries;
}

RunConfig build_config(const ConfigEntries& entries)
{
    const Reader r(entries);
    RunConfig cfg;

    {
        const auto& e = r.entry("schema_version");
        cfg.schema_version = parse_int(e.value, "schema_version", e.line);
        if (cfg.schema_version != config_schema_version) {
            fail("schema_version", e.line,
                 "unsupported version " + e.value + " (expected " + std::to_string(config_schema_version) + ")");
        }
    }
    const std::string units = r.word_or("units", "si");
    if (units == "si") {
        cfg.units = UnitSystem::SI;
    } else if (units == "cm") {
        cfg.units = UnitSystem::Centimetre;
    } else {
        r.bad_choice("units", "si, cm");
    }

    const int order = r.integer_or("model.order", 0);
    if (order != 2 && order != 3) {
        if (!r.has("model.order")) {
            fail("model.order", 0, "required key is missing");
        }
        fail("model.order", r.entry("model.order").line, "must be 2 or 3");
    }
    cfg.order = order == 2 ? Order::Second : Order::Third;
    const bool third = cfg.order == Order::Third;

    cfg.physical.alpha = r.number("model.alpha");
    cfg.physical.beta = r.number("model.beta");
    cfg.physical.k_cond = r.number("model.k_cond");
    cfg.physical.t_melt = r.number("model.t_melt");
    cfg.physical.length = r.number("model.length");
    cfg.physical.eps = r.number("model.eps");
    if (third) {
        cfg.physical.eps2 = r.number("model.eps2");
    } else {
        r.forbid("model.eps2", "only valid with order = 3");
    }

    cfg.initial.s0 = r.number("initial.s0");
    cfg.initial.v0 = r.number_or("initial.v0", 0.0);
    cfg.initial.a0 = r.optional_number("initial.a0");
    if (!third) {
        r.forbid("initial.a0", "only valid with order = 3");
    }
    const std::string profile = r.word_or("initial.profile", "linear");
    if (profile == "linear") {
        cfg.initial.profile = LinearProfile{r.number("initial.surplus")};
        r.forbid("initial.samples", "only valid with profile = tabulated");
    } else if (profile == "tabulated") {
        cfg.initial.profile = TabulatedProfile{r.pairs("initial.samples")};
        r.forbid("initial.surplus", "only valid with profile = linear");
    } else {
        r.bad_choice("initial.profile", "linear, tabulated");
    }

    cfg.gains.c1 = r.number("controller.c1");
    cfg.gains.c2 = r.number("controller.c2");
    cfg.gains.setpoint = r.number("controller.setpoint");
    if (third) {
        cfg.gains.c3 = r.number("controller.c3");
    } else {
        r.forbid("controller.c3", "only valid with order = 3");
    }
    const std::string relaxation = r.word_or("controller.relaxation", "eps1");
    if (relaxation == "eps1") {
        cfg.relaxation = SetpointRelaxation::Eps1;
    } else if (relaxation == "eps2") {
        cfg.relaxation = SetpointRelaxation::Eps2;
    } else if (relaxation == "sum") {
        cfg.relaxation = SetpointRelaxation::Sum;
    } else {
        r.bad_choice("controller.relaxation", "eps1, eps2, sum");
    }
    const std::string mode = r.word_or("controller.mode", "closed-loop");
    if (mode == "closed-loop") {
        cfg.mode = ClosedLoop{};
        r.forbid("controller.schedule", "only valid with mode = open-loop");
    } else if (mode == "open-loop") {
        cfg.mode = OpenLoop{r.pairs("controller.schedule")};
    } else {
        r.bad_choice("controller.mode", "closed-loop, open-loop");
    }

    const SolverConfig defaults;
    cfg.solver.nx = r.integer_or("solver.nx", defaults.nx);
    cfg.solver.dt = r.number_or("solver.dt", defaults.dt);
    cfg.solver.t_final = r.number_or("solver.t_final", defaults.t_final);
    const std::string scheme = r.word_or("solver.scheme", "crank-nicolson");
    if (scheme == "crank-nicolson") {
        cfg.solver.scheme = Scheme::CrankNicolson;
    } else if (scheme == "explicit-euler") {
        cfg.solver.scheme = Scheme::ExplicitEuler;
    } else {
        r.bad_choice("solver.scheme", "crank-nicolson, explicit-euler");
    }
    cfg.solver.flux_stencil = r.integer_or("solver.flux_stencil", defaults.flux_stencil);
    if (cfg.solver.flux_stencil != 2 && cfg.solver.flux_stencil != 3) {
        fail("solver.flux_stencil", r.entry("solver.flux_stencil").line, "must be 2 or 3");
    }
    cfg.solver.corrector_passes = r.integer_or("solver.corrector_passes", defaults.corrector_passes);
    if (cfg.solver.corrector_passes < 0) {
        fail("solver.corrector_passes", r.entry("solver.corrector_passes").line, "must be >= 0");
    }
    cfg.solver.startup_mesh_ratio = r.number_or("solver.startup_mesh_ratio", defaults.startup_mesh_ratio);

    Tolerances& tol = cfg.solver.tol;
    tol.bc = r.number_or("tolerances.bc", tol.bc);
    tol.temp = r.number_or("tolerances.temp", tol.temp);
    tol.mono = r.number_or("tolerances.mono", tol.mono);
    tol.grad = r.number_or("tolerances.grad", tol.grad);
    tol.qc_rel = r.number_or("tolerances.qc_rel", tol.qc_rel);
    tol.s_bound = r.number_or("tolerances.s_bound", tol.s_bound);
    tol.lyap = r.number_or("tolerances.lyap", tol.lyap);

    cfg.output_dir = r.word_or("output.directory", "");
    cfg.record_every = r.integer_or("output.record_every", 1);
    if (cfg.record_every < 1) {
        fail("output.record_every", r.entry("output.record_every").line, "must be >= 1");
    }
    return cfg;
}

RunConfig parse_config(std::string_view text)
{
    return build_config(parse_entries(text));
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string render_config(const RunConfig& c)
{
    std::ostringstream os;
    auto kv = [&](const char* key, const std::string& value) { os << key << " = " << value << '\n'; };
    auto num = [&](const char* key, double value) { kv(key, format_double(value)); };

    kv("schema_version", std::to_string(c.schema_version));
    kv("units", to_string(c.units));

    os << "\n[model]\n";
    kv("order", std::to_string(dimension(c.order)));
    num("alpha", c.physical.alpha);
    num("beta", c.physical.beta);
    num("k_cond", c.physical.k_cond);
    num("t_melt", c.physical.t_melt);
    num("length", c.physical.length);
    num("eps", c.physical.eps);
    if (c.physical.eps2) {
        num("eps2", *c.physical.eps2);
    }

    os << "\n[initial]\n";
    num("s0", c.initial.s0);
    num("v0", c.initial.v0);
    if (c.initial.a0) {
        num("a0", *c.initial.a0);
    }
    if (const auto* lin = std::get_if<LinearProfile>(&c.initial.profile)) {
        kv("profile", "linear");
        num("surplus", lin->surplus);
    } else {
        kv("profile", "tabulated");
        kv("samples", render_pairs(std::get<TabulatedProfile>(c.initial.profile).samples));
    }

    os << "\n[controller]\n";
    const auto* open = std::get_if<OpenLoop>(&c.mode);
    kv("mode", open ? "open-loop" : "closed-loop");
    num("c1", c.gains.c1);
    num("c2", c.gains.c2);
    if (c.gains.c3) {
        num("c3", *c.gains.c3);
    }
    num("setpoint", c.gains.setpoint);
    kv("relaxation", to_string(c.relaxation));
    if (open) {
        kv("schedule", render_pairs(open->schedule));
    }

    os << "\n[solver]\n";
    kv("nx", std::to_string(c.solver.nx));
    num("dt", c.solver.dt);
    num("t_final", c.solver.t_final);
    kv("scheme", c.solver.scheme == Scheme::CrankNicolson ? "crank-nicolson" : "explicit-euler");
    kv("flux_stencil", std::to_string(c.solver.flux_stencil));
    kv("corrector_passes", std::to_string(c.solver.corrector_passes));
    num("startup_mesh_ratio", c.solver.startup_mesh_ratio);

    os << "\n[tolerances]\n";
    num("bc", c.solver.tol.bc);
    num("temp", c.solver.tol.temp);
    num("mono", c.solver.tol.mono);
    num("grad", c.solver.tol.grad);
    num("qc_rel", c.solver.tol.qc_rel);
    num("s_bound", c.solver.tol.s_bound);
    num("lyap", c.solver.tol.lyap);

    os << "\n[output]\n";
    if (!c.output_dir.empty()) {
        kv("directory", c.output_dir);
    }
    kv("record_every", std::to_string(c.record_every));
    return os.str();
}

RunConfig to_si(const RunConfig& config)
{
    if (config.units == UnitSystem::SI) {
        return config;
    }
    RunConfig c = config;
    c.units = UnitSystem::SI;
    c.physical.alpha *= scale_of("model.alpha");
    c.physical.beta *= scale_of("model.beta");
    c.physical.k_cond *= scale_of("model.k_cond");
    c.physical.length *= scale_of("model.length");
    const double len = scale_of("initial.s0");
    c.initial.s0 *= len;
    c.initial.v0 *= scale_of("initial.v0");
    if (c.initial.a0) {
        *c.initial.a0 *= scale_of("initial.a0");
    }
    if (auto* tab = std::get_if<TabulatedProfile>(&c.initial.profile)) {
        for (auto& [x, temp] : tab->samples) {
            x *= len;
        }
    }
    c.gains.setpoint *= scale_of("controller.setpoint");
    if (auto* open = std::get_if<OpenLoop>(&c.mode)) {
        for (auto& [t, qc] : open->schedule) {
            qc *= schedule_qc_cm_to_si;
        }
    }
    c.solver.tol.mono *= scale_of("tolerances.mono");
    c.solver.tol.grad *= scale_of("tolerances.grad");
    c.solver.tol.s_bound *= scale_of("tolerances.s_bound");
    return c;
}

} // namespace stefan
