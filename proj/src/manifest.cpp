#include "rotortrap/manifest.hpp"
#include "rotortrap/csvio.hpp"
#include "rotortrap/errors.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

namespace rotortrap {

namespace {

std::string digest_to_hex(const unsigned char* digest, unsigned len) {
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

struct CtxFree {
    void operator()(EVP_MD_CTX* p) const { EVP_MD_CTX_free(p); }
};

} // namespace

std::string sha256_hex(const std::string& bytes) {
    std::unique_ptr<EVP_MD_CTX, CtxFree> ctx(EVP_MD_CTX_new());
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw NumericalError("sha256 digest failed");
    return digest_to_hex(digest, len);
}

std::string sha256_file_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path + ": cannot open for hashing");
    std::unique_ptr<EVP_MD_CTX, CtxFree> ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        throw NumericalError("sha256 digest failed");
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        const std::streamsize got = in.gcount();
        if (got > 0 && EVP_DigestUpdate(ctx.get(), buf, static_cast<size_t>(got)) != 1)
            throw NumericalError("sha256 digest failed");
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw NumericalError("sha256 digest failed");
    return digest_to_hex(digest, len);
}

void Manifest::add(const std::string& key, const std::string& value) {
    entries_.emplace_back(key, value);
}

void Manifest::add(const std::string& key, double value) {
    entries_.emplace_back(key, format_double(value));
}

void Manifest::add(const std::string& key, long long value) {
    entries_.emplace_back(key, std::to_string(value));
}

void Manifest::add_output(const std::string& base_dir, const std::string& relpath) {
    const std::filesystem::path full = std::filesystem::path(base_dir) / relpath;
    entries_.emplace_back("output." + relpath + ".sha256", sha256_file_hex(full.string()));
}

std::string Manifest::text() const {
    std::string out;
    for (const auto& [k, v] : entries_) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    }
    return out;
}

void Manifest::write_file(const std::string& path) const {
    write_text_file(path, text());
}

} // namespace rotortrap
