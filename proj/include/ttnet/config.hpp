#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace ttnet {

/// Parses "key = value" lines; '#' starts a comment, blank lines are skipped.
/// Throws ConfigError for malformed lines or duplicate keys.
std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& origin = "config");
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

/// Typed access to a key/value map that remembers which keys were used.
class ConfigReader {
public:
    explicit ConfigReader(std::map<std::string, std::string> values, std::string origin = "config");

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void read(const std::string& key, std::string& out);
    void read(const std::string& key, double& out);
    void read(const std::string& key, int& out);
    void read(const std::string& key, bool& out);
    void read(const std::string& key, std::uint64_t& out);

    /// Throws ConfigError naming every key that was never read.
    void reject_unknown() const;

private:
    const std::string* find(const std::string& key);
    [[noreturn]] void fail(const std::string& key, const std::string& value, const char* type) const;

    std::map<std::string, std::string> values_;
    std::map<std::string, bool> used_;
    std::string origin_;
};

}  // namespace ttnet
