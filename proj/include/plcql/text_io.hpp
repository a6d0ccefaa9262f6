#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace plcql {

/// Shortest decimal form that parses back to the exact same double.
std::string fmt_double(double x);

double parse_double(std::string_view s);
long long parse_int(std::string_view s);

std::string join_doubles(std::span<const double> xs);
std::string join_ints(std::span<const int> xs);
std::vector<double> split_doubles(std::string_view s);
std::vector<int> split_ints(std::string_view s);

std::vector<std::string> split_ws(std::string_view s);
std::string_view trim(std::string_view s);

/// FNV-1a 64-bit hash; used for dataset checksums and env fingerprints.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull);

/// Ordered "key = value" document, the structured-text container behind
/// checkpoints and run summaries. Keys are unique; order is preserved so
/// reruns emit byte-identical files.
class TextDoc {
  public:
    void set(std::string key, std::string value);
    void set_double(const std::string& key, double v);
    void set_int(const std::string& key, long long v);
    void set_doubles(const std::string& key, std::span<const double> v);
    void set_ints(const std::string& key, std::span<const int> v);

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;
    double get_double(const std::string& key) const;
    long long get_int(const std::string& key) const;
    std::vector<double> get_doubles(const std::string& key) const;
    std::vector<int> get_ints(const std::string& key) const;

    std::string serialize() const;
    static TextDoc parse(std::string_view text);

    void save(const std::string& path) const;
    static TextDoc load(const std::string& path);

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

} // namespace plcql
