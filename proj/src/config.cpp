#include "ttnet/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ttnet/error.hpp"

namespace ttnet {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& origin) {
    std::map<std::string, std::string> values;
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = origin + ":" + std::to_string(number);
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(where + ": empty key");
        if (!values.emplace(key, trim(line.substr(eq + 1))).second) {
            throw ConfigError(where + ": duplicate key '" + key + "'");
        }
    }
    return values;
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_key_values(text.str(), path.string());
}

ConfigReader::ConfigReader(std::map<std::string, std::string> values, std::string origin)
    : values_(std::move(values)), origin_(std::move(origin)) {}

const std::string* ConfigReader::find(const std::string& key) {
    const auto it = values_.find(key);
    if (it == values_.end()) return nullptr;
    used_[key] = true;
    return &it->second;
}

void ConfigReader::fail(const std::string& key, const std::string& value, const char* type) const {
    throw ConfigError(origin_ + ": '" + key + "' expects " + type + ", got '" + value + "'");
}

void ConfigReader::read(const std::string& key, std::string& out) {
    if (const auto* v = find(key)) out = *v;
}

void ConfigReader::read(const std::string& key, double& out) {
    const auto* v = find(key);
    if (!v) return;
    // from_chars for double is missing in older standard libraries.
    try {
        std::size_t used = 0;
        const double d = std::stod(*v, &used);
        if (used != v->size()) fail(key, *v, "a number");
        out = d;
    } catch (const std::logic_error&) {
        fail(key, *v, "a number");
    }
}

void ConfigReader::read(const std::string& key, int& out) {
    if (const auto* v = find(key); v && !parse_number(*v, out)) fail(key, *v, "an integer");
}

void ConfigReader::read(const std::string& key, std::uint64_t& out) {
    if (const auto* v = find(key); v && !parse_number(*v, out)) fail(key, *v, "a non-negative integer");
}

void ConfigReader::read(const std::string& key, bool& out) {
    const auto* v = find(key);
    if (!v) return;
    if (*v == "true" || *v == "1" || *v == "yes") {
        out = true;
    } else if (*v == "false" || *v == "0" || *v == "no") {
        out = false;
    } else {
        fail(key, *v, "a boolean");
    }
}

void ConfigReader::reject_unknown() const {
    std::string unknown;
    for (const auto& [key, value] : values_) {
        if (!used_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
    }
    if (!unknown.empty()) throw ConfigError(origin_ + ": unknown keys: " + unknown);
}

}  // namespace ttnet
