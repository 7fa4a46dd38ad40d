#include "segtraj/toml.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace segtraj::toml {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// Removes a trailing comment, respecting quoted strings.
std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
        } else if (c == '"') {
            in_string = true;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    return line;
}

bool valid_key(const std::string& key) {
    if (key.empty()) return false;
    for (char c : key) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.')
            return false;
    }
    return true;
}

std::string parse_string_literal(const std::string& raw, int line_no) {
    if (raw.size() < 2 || raw.back() != '"')
        throw ConfigError("toml line " + std::to_string(line_no) + ": unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
        char c = raw[i];
        if (c == '"')
            throw ConfigError("toml line " + std::to_string(line_no) +
                              ": unexpected quote inside string");
        if (c == '\\') {
            if (i + 2 >= raw.size())
                throw ConfigError("toml line " + std::to_string(line_no) + ": dangling escape");
            const char e = raw[++i];
            switch (e) {
                case 'n': c = '\n'; break;
                case 't': c = '\t'; break;
                case 'r': c = '\r'; break;
                case '"': c = '"'; break;
                case '\\': c = '\\'; break;
                default:
                    throw ConfigError("toml line " + std::to_string(line_no) +
                                      ": unsupported escape \\" + std::string(1, e));
            }
        }
        out.push_back(c);
    }
    return out;
}

Value parse_scalar(const std::string& raw, int line_no);

std::vector<std::string> split_array_items(const std::string& body, int line_no) {
    std::vector<std::string> items;
    std::string current;
    bool in_string = false;
    for (std::size_t i = 0; i < body.size(); ++i) {
        const char c = body[i];
        if (in_string) {
            current.push_back(c);
            if (c == '\\' && i + 1 < body.size()) current.push_back(body[++i]);
            else if (c == '"') in_string = false;
        } else if (c == '"') {
            in_string = true;
            current.push_back(c);
        } else if (c == ',') {
            items.push_back(trim(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (in_string)
        throw ConfigError("toml line " + std::to_string(line_no) + ": unterminated string");
    const std::string last = trim(current);
    if (!last.empty()) items.push_back(last);
    for (const std::string& item : items)
        if (item.empty())
            throw ConfigError("toml line " + std::to_string(line_no) + ": empty array item");
    return items;
}

Value parse_scalar(const std::string& raw, int line_no) {
    Value v;
    if (raw.empty())
        throw ConfigError("toml line " + std::to_string(line_no) + ": missing value");

    if (raw.front() == '"') {
        v.kind = Value::Kind::string;
        v.str = parse_string_literal(raw, line_no);
        return v;
    }
    if (raw.front() == '[') {
        if (raw.back() != ']')
            throw ConfigError("toml line " + std::to_string(line_no) + ": unterminated array");
        v.kind = Value::Kind::array;
        for (const std::string& item :
             split_array_items(raw.substr(1, raw.size() - 2), line_no))
            v.array.push_back(parse_scalar(item, line_no));
        return v;
    }
    if (raw == "true" || raw == "false") {
        v.kind = Value::Kind::boolean;
        v.boolean = raw == "true";
        return v;
    }

    const bool looks_real = raw.find_first_of(".eE") != std::string::npos &&
                            raw.find_first_not_of("+-0123456789.eE") == std::string::npos;
    if (!looks_real) {
        long long n = 0;
        auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), n);
        if (ec == std::errc() && ptr == raw.data() + raw.size()) {
            v.kind = Value::Kind::integer;
            v.integer = n;
            return v;
        }
    }
    {
        double d = 0.0;
        auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), d);
        if (ec == std::errc() && ptr == raw.data() + raw.size()) {
            v.kind = Value::Kind::real;
            v.real = d;
            return v;
        }
    }
    throw ConfigError("toml line " + std::to_string(line_no) + ": cannot parse value '" + raw +
                      "'");
}

} // namespace

double Value::as_real(const std::string& key) const {
    if (kind == Kind::real) return real;
    if (kind == Kind::integer) return static_cast<double>(integer);
    throw ConfigError("config key '" + key + "' is not a number");
}

Table parse(const std::string& text) {
    Table table;
    std::istringstream in(text);
    std::string line;
    std::string prefix;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        line = trim(strip_comment(line));
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("toml line " + std::to_string(line_no) +
                                  ": malformed section header");
            const std::string name = trim(line.substr(1, line.size() - 2));
            if (!valid_key(name))
                throw ConfigError("toml line " + std::to_string(line_no) +
                                  ": invalid section name '" + name + "'");
            prefix = name + ".";
            continue;
        }

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("toml line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (!valid_key(key))
            throw ConfigError("toml line " + std::to_string(line_no) + ": invalid key '" + key +
                              "'");
        const std::string full = prefix + key;
        if (table.count(full))
            throw ConfigError("toml line " + std::to_string(line_no) + ": duplicate key '" +
                              full + "'");
        table[full] = parse_scalar(trim(line.substr(eq + 1)), line_no);
    }
    return table;
}

Table parse_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

bool has(const Table& table, const std::string& key) { return table.count(key) > 0; }

std::string get_string(const Table& table, const std::string& key, const std::string& fallback) {
    const auto it = table.find(key);
    if (it == table.end()) return fallback;
    if (it->second.kind != Value::Kind::string)
        throw ConfigError("config key '" + key + "' is not a string");
    return it->second.str;
}

long long get_int(const Table& table, const std::string& key, long long fallback) {
    const auto it = table.find(key);
    if (it == table.end()) return fallback;
    if (it->second.kind != Value::Kind::integer)
        throw ConfigError("config key '" + key + "' is not an integer");
    return it->second.integer;
}

double get_real(const Table& table, const std::string& key, double fallback) {
    const auto it = table.find(key);
    if (it == table.end()) return fallback;
    return it->second.as_real(key);
}

bool get_bool(const Table& table, const std::string& key, bool fallback) {
    const auto it = table.find(key);
    if (it == table.end()) return fallback;
    if (it->second.kind != Value::Kind::boolean)
        throw ConfigError("config key '" + key + "' is not a boolean");
    return it->second.boolean;
}

std::vector<double> get_real_array(const Table& table, const std::string& key) {
    const auto it = table.find(key);
    if (it == table.end()) return {};
    if (it->second.kind != Value::Kind::array)
        throw ConfigError("config key '" + key + "' is not an array");
    std::vector<double> out;
    out.reserve(it->second.array.size());
    for (const Value& v : it->second.array) out.push_back(v.as_real(key));
    return out;
}

} // namespace segtraj::toml
