#pragma once

#include "rotortrap/model.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rotortrap {

// Flat key = value configuration ('#' starts a comment, blank lines ignored).
// Keys keep their source line number so errors can point at them.
class Config {
public:
    static Config parse_file(const std::string& path);
    static Config parse_text(const std::string& text, const std::string& origin);

    // Later assignments win (used for flag overrides); line -1 marks overrides.
    void set(const std::string& key, const std::string& value, int line = -1);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key) const;
    long long get_int(const std::string& key, long long fallback) const;

    const std::map<std::string, std::string>& entries() const { return values_; }
    const std::string& origin() const { return origin_; }

private:
    [[noreturn]] void fail(const std::string& key, const std::string& why) const;

    std::map<std::string, std::string> values_;
    std::map<std::string, int> lines_;
    std::string origin_ = "<none>";
};

// Fully resolved physical setup built from a Config. Accepts either an
// explicit body (body.*) or a spheroid description (spheroid.*).
// Units at this boundary: volts, Hz, µm, e, kg, C·m², kg·m², kg/m³.
struct ResolvedSetup {
    TrapDrive trap;
    RigidBody body;
    bool body_from_spheroid_spec = false;
    SpheroidSpec spheroid; // meaningful when body_from_spheroid_spec
};

ResolvedSetup setup_from_config(const Config& cfg);

// Default configuration text (the reference parameter set used across tools).
std::string default_config_text();

} // namespace rotortrap
