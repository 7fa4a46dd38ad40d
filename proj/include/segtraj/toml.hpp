#pragma once

#include "segtraj/error.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace segtraj::toml {

// Small TOML subset: [section] headers, key = value pairs with string,
// integer, float, boolean and single-line array values, and # comments.
// Keys are flattened to "section.key".
struct Value {
    enum class Kind { string, integer, real, boolean, array };

    Kind kind = Kind::string;
    std::string str;
    long long integer = 0;
    double real = 0.0;
    bool boolean = false;
    std::vector<Value> array;

    // real also accepts integer values.
    double as_real(const std::string& key) const;
};

using Table = std::map<std::string, Value>;

Table parse(const std::string& text);
Table parse_file(const std::filesystem::path& path);

bool has(const Table& table, const std::string& key);

// Typed access; missing keys return the fallback, wrong types throw
// ConfigError.
std::string get_string(const Table& table, const std::string& key, const std::string& fallback);
long long get_int(const Table& table, const std::string& key, long long fallback);
double get_real(const Table& table, const std::string& key, double fallback);
bool get_bool(const Table& table, const std::string& key, bool fallback);
std::vector<double> get_real_array(const Table& table, const std::string& key);

} // namespace segtraj::toml
