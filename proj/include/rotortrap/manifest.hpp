#pragma once

// Run manifests: every CLI command writes a small key=value manifest next to
// its outputs recording the resolved parameters, the seed, and a SHA-256
// digest of each produced file so runs can be compared byte-for-byte.

#include <string>
#include <utility>
#include <vector>

namespace rotortrap {

std::string sha256_hex(const std::string& bytes);
std::string sha256_file_hex(const std::string& path);

class Manifest {
public:
    void add(const std::string& key, const std::string& value);
    void add(const std::string& key, double value);
    void add(const std::string& key, long long value);

    // Records output.<relpath>.sha256 = <digest of file at base_dir/relpath>.
    void add_output(const std::string& base_dir, const std::string& relpath);

    std::string text() const;
    void write_file(const std::string& path) const;

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

} // namespace rotortrap
