#include "plcql/text_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "plcql/errors.hpp"

namespace plcql {

std::string fmt_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc{}) throw IoError("fmt_double: conversion failed");
    return std::string(buf, ptr);
}

double parse_double(std::string_view s) {
    s = trim(s);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw IoError("parse_double: bad number '" + std::string(s) + "'");
    return v;
}

long long parse_int(std::string_view s) {
    s = trim(s);
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw IoError("parse_int: bad integer '" + std::string(s) + "'");
    return v;
}

std::string join_doubles(std::span<const double> xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ' ';
        out += fmt_double(xs[i]);
    }
    return out;
}

std::string join_ints(std::span<const int> xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(xs[i]);
    }
    return out;
}

std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t start = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i > start) out.emplace_back(s.substr(start, i - start));
    }
    return out;
}

std::vector<double> split_doubles(std::string_view s) {
    std::vector<double> out;
    for (const auto& tok : split_ws(s)) out.push_back(parse_double(tok));
    return out;
}

std::vector<int> split_ints(std::string_view s) {
    std::vector<int> out;
    for (const auto& tok : split_ws(s)) out.push_back(static_cast<int>(parse_int(tok)));
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

void TextDoc::set(std::string key, std::string value) {
    for (auto& [k, v] : entries_) {
        if (k == key) {
            v = std::move(value);
            return;
        }
    }
    entries_.emplace_back(std::move(key), std::move(value));
}

void TextDoc::set_double(const std::string& key, double v) { set(key, fmt_double(v)); }
void TextDoc::set_int(const std::string& key, long long v) { set(key, std::to_string(v)); }
void TextDoc::set_doubles(const std::string& key, std::span<const double> v) { set(key, join_doubles(v)); }
void TextDoc::set_ints(const std::string& key, std::span<const int> v) { set(key, join_ints(v)); }

bool TextDoc::has(const std::string& key) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == key; });
}

const std::string& TextDoc::get(const std::string& key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return v;
    throw IoError("TextDoc: missing key '" + key + "'");
}

double TextDoc::get_double(const std::string& key) const { return parse_double(get(key)); }
long long TextDoc::get_int(const std::string& key) const { return parse_int(get(key)); }
std::vector<double> TextDoc::get_doubles(const std::string& key) const { return split_doubles(get(key)); }
std::vector<int> TextDoc::get_ints(const std::string& key) const { return split_ints(get(key)); }

std::string TextDoc::serialize() const {
    std::string out;
    for (const auto& [k, v] : entries_) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    }
    return out;
}

TextDoc TextDoc::parse(std::string_view text) {
    TextDoc doc;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        if (line.empty() || line.front() == '#') continue;
        std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) throw IoError("TextDoc: malformed line '" + std::string(line) + "'");
        doc.set(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
    }
    return doc;
}

void TextDoc::save(const std::string& path) const { write_file(path, serialize()); }

TextDoc TextDoc::load(const std::string& path) { return parse(read_file(path)); }

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for '" + path + "'");
}

} // namespace plcql
