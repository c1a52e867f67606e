#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

namespace cpreg {

/* Shortest round-trip decimal for a double keeps CSV output byte-stable. */
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    double parsed = 0.0;
    std::sscanf(buf, "%lg", &parsed);
    for (int prec = 1; prec <= 16; ++prec) {
        char probe[40];
        std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
        std::sscanf(probe, "%lg", &parsed);
        if (parsed == v) return probe;
    }
    return buf;
}

/* RFC 4180: quote fields containing separators, quotes, or newlines. */
inline std::string csv_escape(std::string_view field) {
    const bool needs_quote = field.find_first_of(",\"\r\n") != std::string_view::npos;
    if (!needs_quote) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
        append_row(header);
    }

    void append_row(const std::vector<std::string>& fields) {
        if (fields.size() != columns_)
            throw std::invalid_argument("CsvWriter: column count mismatch");
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) body_ += ',';
            body_ += csv_escape(fields[i]);
        }
        body_ += "\r\n";
    }

    const std::string& content() const { return body_; }

    void write_file(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("CsvWriter: cannot open " + path.string());
        out.write(body_.data(), static_cast<std::streamsize>(body_.size()));
        if (!out) throw std::runtime_error("CsvWriter: short write to " + path.string());
    }

private:
    std::size_t columns_;
    std::string body_;
};

/* Content hash in git blob form: sha1("blob <len>\0" + bytes). */
inline std::string git_blob_sha1(std::string_view bytes) {
    std::string preamble = "blob " + std::to_string(bytes.size());
    preamble.push_back('\0');
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int digest_len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw std::runtime_error("git_blob_sha1: EVP_MD_CTX_new failed");
    bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
              EVP_DigestUpdate(ctx, preamble.data(), preamble.size()) == 1 &&
              EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
              EVP_DigestFinal_ex(ctx, digest, &digest_len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw std::runtime_error("git_blob_sha1: digest failed");
    static const char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * digest_len);
    for (unsigned int i = 0; i < digest_len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_text_file: cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace cpreg
