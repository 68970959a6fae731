#include "bradcn/config.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

#include "bradcn/errors.hpp"

namespace bradcn {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<int64_t> parse_int_list(const std::string& value, const std::string& key) {
  std::vector<int64_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stoll(item));
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': cannot parse integer '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

int64_t parse_int(const std::string& value, const std::string& key) {
  try {
    size_t pos = 0;
    const int64_t v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse integer '" + value + "'");
  }
}

std::string join(const std::vector<int64_t>& values) {
  std::string out;
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(values[i]);
  }
  return out;
}

void assign(ModelConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "patch_size") cfg.patch_size = parse_int(value, key);
  else if (key == "embed_dim") cfg.embed_dim = parse_int(value, key);
  else if (key == "num_transformer_blocks") cfg.num_transformer_blocks = parse_int(value, key);
  else if (key == "num_heads") cfg.num_heads = parse_int(value, key);
  else if (key == "reassemble_strides") cfg.reassemble_strides = parse_int_list(value, key);
  else if (key == "fusion_channels") cfg.fusion_channels = parse_int(value, key);
  else if (key == "adcn_base_channels") cfg.adcn_base_channels = parse_int(value, key);
  else if (key == "adcn_depth") cfg.adcn_depth = parse_int(value, key);
  else if (key == "backbone_channels") cfg.backbone_channels = parse_int_list(value, key);
  else if (key == "seed") cfg.seed = static_cast<uint64_t>(parse_int(value, key));
  else throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](int64_t v, const char* name) {
    if (v <= 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(patch_size, "patch_size");
  positive(embed_dim, "embed_dim");
  positive(num_transformer_blocks, "num_transformer_blocks");
  positive(num_heads, "num_heads");
  positive(fusion_channels, "fusion_channels");
  positive(adcn_base_channels, "adcn_base_channels");
  positive(adcn_depth, "adcn_depth");
  if (embed_dim % num_heads != 0) throw ConfigError("embed_dim must be divisible by num_heads");
  if (reassemble_strides.empty()) throw ConfigError("reassemble_strides must be nonempty");
  for (size_t i = 0; i < reassemble_strides.size(); ++i) {
    positive(reassemble_strides[i], "reassemble_strides");
    if (i > 0 && reassemble_strides[i] <= reassemble_strides[i - 1]) {
      throw ConfigError("reassemble_strides must be strictly increasing");
    }
  }
  if (backbone_channels.empty()) throw ConfigError("backbone_channels must be nonempty");
  for (int64_t c : backbone_channels) positive(c, "backbone_channels");
}

int64_t ModelConfig::input_stride() const {
  return std::lcm(token_stride(), reassemble_strides.back());
}

ModelConfig load_model_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  ModelConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    assign(cfg, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

std::string to_config_text(const ModelConfig& cfg) {
  std::ostringstream out;
  out << "patch_size = " << cfg.patch_size << "\n"
      << "embed_dim = " << cfg.embed_dim << "\n"
      << "num_transformer_blocks = " << cfg.num_transformer_blocks << "\n"
      << "num_heads = " << cfg.num_heads << "\n"
      << "reassemble_strides = " << join(cfg.reassemble_strides) << "\n"
      << "fusion_channels = " << cfg.fusion_channels << "\n"
      << "adcn_base_channels = " << cfg.adcn_base_channels << "\n"
      << "adcn_depth = " << cfg.adcn_depth << "\n"
      << "backbone_channels = " << join(cfg.backbone_channels) << "\n"
      << "seed = " << cfg.seed << "\n";
  return out.str();
}

void save_model_config(const ModelConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file: " + path.string());
  out << to_config_text(cfg);
}

void apply_override(ModelConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override must be key=value, got '" + assignment + "'");
  }
  const auto key = trim(assignment.substr(0, eq));
  const auto value = trim(assignment.substr(eq + 1));
  assign(cfg, key, value);
  cfg.validate();
}

}  // namespace bradcn
