#include "rotortrap/config.hpp"
#include "rotortrap/errors.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace rotortrap {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

} // namespace

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path);
}

Config Config::parse_text(const std::string& text, const std::string& origin) {
    Config cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected 'key = value', got '" + stripped + "'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (value.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": empty value for key '" + key + "'");
        cfg.values_[key] = value;
        cfg.lines_[key] = lineno;
    }
    return cfg;
}

void Config::set(const std::string& key, const std::string& value, int line) {
    values_[key] = value;
    lines_[key] = line;
}

bool Config::has(const std::string& key) const { return values_.count(key) != 0; }

void Config::fail(const std::string& key, const std::string& why) const {
    auto it = lines_.find(key);
    std::string where = origin_;
    if (it != lines_.end() && it->second > 0) where += ":" + std::to_string(it->second);
    throw ConfigError(where + ": key '" + key + "': " + why);
}

std::string Config::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end())
        throw ConfigError(origin_ + ": missing required key '" + key + "'");
    return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key) const {
    const std::string raw = get_string(key);
    try {
        size_t pos = 0;
        const double v = std::stod(raw, &pos);
        if (pos != raw.size()) fail(key, "trailing characters in number '" + raw + "'");
        if (!std::isfinite(v)) fail(key, "non-finite value");
        return v;
    } catch (const std::invalid_argument&) {
        fail(key, "not a number: '" + raw + "'");
    } catch (const std::out_of_range&) {
        fail(key, "number out of range: '" + raw + "'");
    }
}

double Config::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

long long Config::get_int(const std::string& key) const {
    const std::string raw = get_string(key);
    long long v = 0;
    auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
    if (ec != std::errc{} || p != raw.data() + raw.size())
        fail(key, "not an integer: '" + raw + "'");
    return v;
}

long long Config::get_int(const std::string& key, long long fallback) const {
    return has(key) ? get_int(key) : fallback;
}

ResolvedSetup setup_from_config(const Config& cfg) {
    ResolvedSetup out;

    TrapDrive trap;
    trap.v0 = cfg.get_double("trap.v0_volts");
    trap.omega_d = 2.0 * constants::pi * cfg.get_double("trap.freq_hz");
    trap.ell0 = 1e-6 * cfg.get_double("trap.ell0_um");
    trap.ax = cfg.get_double("trap.ax");
    trap.ay = cfg.get_double("trap.ay");
    trap.az = cfg.get_double("trap.az");
    out.trap = validate_trap(trap);

    const double gamma0 = 2.0 * constants::pi * cfg.get_double("damping.gamma0_hz", 0.0);

    const bool explicit_body = cfg.has("body.i1_kgm2");
    const bool spheroid_body = cfg.has("spheroid.b_um");
    if (explicit_body == spheroid_body)
        throw ConfigError(cfg.origin() +
                          ": provide exactly one of body.* (body.i1_kgm2 ...) or spheroid.* "
                          "(spheroid.b_um ...) particle descriptions");

    if (explicit_body) {
        RigidBody body;
        body.I1 = cfg.get_double("body.i1_kgm2");
        body.I2 = cfg.get_double("body.i2_kgm2");
        body.I3 = cfg.get_double("body.i3_kgm2");
        body.Q1 = cfg.get_double("body.q1_cm2");
        body.Q2 = cfg.get_double("body.q2_cm2");
        body.Q3 = cfg.get_double("body.q3_cm2");
        body.q_tot = constants::elementary_charge_c * cfg.get_double("body.charge_e", 0.0);
        body.mass = cfg.get_double("body.mass_kg");
        body.gamma0 = gamma0;
        out.body = validate_body(body);
    } else {
        SpheroidSpec spec;
        spec.a_minor = 1e-6 * cfg.get_double("spheroid.a_um");
        spec.b_major = 1e-6 * cfg.get_double("spheroid.b_um");
        spec.q_tot = constants::elementary_charge_c * cfg.get_double("spheroid.charges_e");
        spec.density = cfg.get_double("spheroid.density_kgm3", constants::default_density_kg_m3);
        const std::string dq_model = cfg.get_string("spheroid.deltaq_model", "estimate");
        DeltaQModel dq;
        if (dq_model == "estimate") dq = DeltaQModel::ClosedFormEstimate;
        else if (dq_model == "quadrature") dq = DeltaQModel::SurfaceQuadrature;
        else throw ConfigError(cfg.origin() + ": key 'spheroid.deltaq_model': expected "
                               "'estimate' or 'quadrature', got '" + dq_model + "'");
        out.body = body_from_spheroid(spec, gamma0, dq);
        out.body_from_spheroid_spec = true;
        out.spheroid = spec;
    }
    return out;
}

std::string default_config_text() {
    return
        "# Reference trap / particle parameter set.\n"
        "trap.v0_volts = 590\n"
        "trap.freq_hz = 3800\n"
        "trap.ell0_um = 30\n"
        "trap.ax = -0.045\n"
        "trap.ay = 0.058\n"
        "trap.az = -0.013\n"
        "damping.gamma0_hz = 1000\n"
        "spheroid.a_um = 4\n"
        "spheroid.b_um = 15\n"
        "spheroid.charges_e = 2500\n"
        "spheroid.density_kgm3 = 2200\n";
}

} // namespace rotortrap
