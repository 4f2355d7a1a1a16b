#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tkre {

// Plain key=value run configuration. std::map keeps serialization sorted so
// archived configs are byte-stable.
using ConfigMap = std::map<std::string, std::string>;

// Parses "key = value" lines; '#' starts a comment; blank lines ignored.
ConfigMap load_config_file(const std::string& path);
ConfigMap parse_config_text(const std::string& text, const std::string& origin);
void write_config_file(const std::string& path, const ConfigMap& cfg);
std::string config_to_text(const ConfigMap& cfg);

std::string cfg_get(const ConfigMap& cfg, const std::string& key, const std::string& fallback);
std::uint64_t cfg_get_u64(const ConfigMap& cfg, const std::string& key, std::uint64_t fallback);
double cfg_get_double(const ConfigMap& cfg, const std::string& key, double fallback);
bool cfg_get_bool(const ConfigMap& cfg, const std::string& key, bool fallback);

std::vector<std::string> split_csv_list(const std::string& s);

}  // namespace tkre
