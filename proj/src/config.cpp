#include "dcpose/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace dcpose {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  return out;
}

}  // namespace

Config Config::defaults() {
  Config c;
  c.values_ = {
      // dataset synthesis
      {"synth.train_clips", "200"},
      {"synth.test_clips", "50"},
      {"synth.occlusion_clips", "50"},
      {"synth.persons", "1"},
      {"synth.joints", "15"},
      {"synth.frames", "3"},
      {"synth.height", "24"},
      {"synth.width", "24"},
      {"synth.sigma", "2"},
      {"synth.max_velocity", "1.5"},
      {"synth.max_turn", "0.25"},
      {"synth.occlusion_prob", "0.15"},
      {"synth.occlusion_split_prob", "0.4"},
      {"synth.blur_min", "0.5"},
      {"synth.blur_max", "1.5"},
      {"synth.jitter_sigma", "1"},
      // training
      {"train.lr", "1e-4"},
      {"train.lr_decay", "0.9"},
      {"train.decay_every", "4"},
      {"train.epochs", "20"},
      {"train.batch_size", "8"},
      {"train.augment", "true"},
      {"train.split", "train"},
      {"train.ptm", "full"},
      {"train.prf", "full"},
      {"train.dilations", "3,6,9,12,15"},
      {"train.window", "1"},
      {"train.use_prev", "true"},
      {"train.use_next", "true"},
      // evaluation
      {"eval.split", "occlusion"},
      {"eval.thresholds", "0.2"},
      {"eval.selector_seed", "0"},
      {"ablate.eval_splits", "test,occlusion"},
      // rendering
      {"render.scale", "8"},
      {"render.clips", "4"},
      {"render.split", "occlusion"},
  };
  return c;
}

void Config::set(const std::string& key, const std::string& value) {
  if (!has(key)) throw ConfigError("config: unknown key '" + key + "'");
  values_[key] = value;
}

void Config::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("config: expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::merge_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = origin + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw ConfigError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": empty key");
    const auto full = section.empty() ? key : section + "." + key;
    if (!has(full)) throw ConfigError(where + ": unknown key '" + full + "'");
    values_[full] = trim(line.substr(eq + 1));
  }
}

void Config::merge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str(), path);
}

const std::string& Config::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config: unknown key '" + key + "'");
  return it->second;
}

long long Config::integer(const std::string& key) const { return parse_number<long long>(key, str(key)); }

double Config::real(const std::string& key) const { return parse_number<double>(key, str(key)); }

bool Config::boolean(const std::string& key) const {
  const auto& v = str(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: '" + key + "' expects a boolean, got '" + v + "'");
}

std::vector<int> Config::int_list(const std::string& key) const {
  std::vector<int> out;
  for (const auto& item : split_list(str(key))) out.push_back(parse_number<int>(key, item));
  return out;
}

std::vector<double> Config::real_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(str(key))) out.push_back(parse_number<double>(key, item));
  return out;
}

std::vector<std::string> Config::str_list(const std::string& key) const { return split_list(str(key)); }

std::string Config::dump() const {
  std::ostringstream os;
  std::string section;
  for (const auto& [key, value] : values_) {
    const auto dot = key.find('.');
    const auto sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) os << "\n";
      os << "[" << sec << "]\n";
      section = sec;
    }
    os << key.substr(dot + 1) << " = " << value << "\n";
  }
  return os.str();
}

}  // namespace dcpose
