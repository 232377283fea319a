#include "qamatch/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "qamatch/error.hpp"

namespace qamatch {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  throw ParameterError(std::string(key) + ": expected " + expected + ", got '" + std::string(value) + "'");
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  bad_value(key, v, "true or false");
}

std::vector<std::string> split_list(std::string_view v) {
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = v.find(',', start);
    out.emplace_back(trim(v.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ',';
    out += parts[i];
  }
  return out;
}

template <typename T, typename F>
std::string join_numbers(const std::vector<T>& values, F format) {
  std::vector<std::string> parts;
  for (const auto& v : values) parts.push_back(format(v));
  return join(parts);
}

std::string b(bool v) { return v ? "true" : "false"; }

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

KeyValues parse_key_values(std::istream& in) {
  KeyValues out;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw ParameterError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key(trim(t.substr(0, eq)));
    std::string value(trim(t.substr(eq + 1)));
    if (key.empty()) throw ParameterError("config line " + std::to_string(line_no) + ": empty key");
    if (!seen.insert(key).second) throw ParameterError("config line " + std::to_string(line_no) + ": duplicate key " + key);
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open config file " + path.string());
  return parse_key_values(in);
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

void set_option(TrainConfig& cfg, std::string_view key, std::string_view raw) {
  const auto v = trim(raw);
  if (key == "temperature") cfg.temperature = parse_double(key, v);
  else if (key == "alpha") cfg.alpha = parse_double(key, v);
  else if (key == "beta") cfg.beta = parse_double(key, v);
  else if (key == "window") cfg.window = parse_uint(key, v);
  else if (key == "learning_rate") cfg.learning_rate = parse_double(key, v);
  else if (key == "momentum") cfg.momentum = parse_double(key, v);
  else if (key == "labeled_batch") cfg.labeled_batch = parse_uint(key, v);
  else if (key == "unlabeled_batch") cfg.unlabeled_batch = parse_uint(key, v);
  else if (key == "iterations") cfg.iterations = parse_uint(key, v);
  else if (key == "seed") cfg.seed = parse_uint(key, v);
  else if (key == "hidden") {
    std::vector<std::size_t> widths;
    for (const auto& part : split_list(v)) widths.push_back(parse_uint(key, part));
    cfg.hidden = std::move(widths);
  } else if (key == "eval_interval") cfg.eval_interval = parse_uint(key, v);
  else if (key == "rebalance") cfg.rebalance = parse_bool(key, v);
  else if (key == "calibration") cfg.calibration = parse_bool(key, v);
  else if (key == "softmix") cfg.softmix = parse_bool(key, v);
  else if (key == "anchor") cfg.anchor = parse_bool(key, v);
  else if (key == "use_unlabeled") cfg.use_unlabeled = parse_bool(key, v);
  else if (key == "normalize_weights") cfg.normalize_weights = parse_bool(key, v);
  else if (key == "scale_bs") cfg.scale_bs = parse_double(key, v);
  else if (key == "scale_m") cfg.scale_m = parse_double(key, v);
  else if (key == "scale_c") cfg.scale_c = parse_double(key, v);
  else throw ParameterError("unknown config key '" + std::string(key) + "'");
}

KeyValues entries(const TrainConfig& c) {
  auto u = [](std::uint64_t v) { return std::to_string(v); };
  return {
      {"temperature", format_double(c.temperature)},
      {"alpha", format_double(c.alpha)},
      {"beta", format_double(c.beta)},
      {"window", u(c.window)},
      {"learning_rate", format_double(c.learning_rate)},
      {"momentum", format_double(c.momentum)},
      {"labeled_batch", u(c.labeled_batch)},
      {"unlabeled_batch", u(c.unlabeled_batch)},
      {"iterations", u(c.iterations)},
      {"seed", u(c.seed)},
      {"hidden", join_numbers(c.hidden, u)},
      {"eval_interval", u(c.eval_interval)},
      {"rebalance", b(c.rebalance)},
      {"calibration", b(c.calibration)},
      {"softmix", b(c.softmix)},
      {"anchor", b(c.anchor)},
      {"use_unlabeled", b(c.use_unlabeled)},
      {"normalize_weights", b(c.normalize_weights)},
      {"scale_bs", format_double(c.scale_bs)},
      {"scale_m", format_double(c.scale_m)},
      {"scale_c", format_double(c.scale_c)},
  };
}

void set_option(SynthConfig& cfg, std::string_view key, std::string_view raw) {
  const auto v = trim(raw);
  if (key == "preset") apply_preset(cfg, std::string(v));
  else if (key == "classes") cfg.classes = parse_uint(key, v);
  else if (key == "dim") cfg.dim = parse_uint(key, v);
  else if (key == "class_names") cfg.class_names = split_list(v);
  else if (key == "profile") {
    if (v == "longtail") cfg.profile = CountProfile::longtail;
    else if (v == "proportions") cfg.profile = CountProfile::proportions;
    else bad_value(key, v, "longtail or proportions");
  } else if (key == "n_max_labeled") cfg.n_max_labeled = parse_uint(key, v);
  else if (key == "gamma_labeled") cfg.gamma_labeled = parse_double(key, v);
  else if (key == "n_max_unlabeled") cfg.n_max_unlabeled = parse_uint(key, v);
  else if (key == "gamma_unlabeled") cfg.gamma_unlabeled = parse_double(key, v);
  else if (key == "proportions") {
    std::vector<double> p;
    for (const auto& part : split_list(v)) p.push_back(parse_double(key, part));
    cfg.proportions = std::move(p);
  } else if (key == "n_labeled") cfg.n_labeled = parse_uint(key, v);
  else if (key == "n_unlabeled") cfg.n_unlabeled = parse_uint(key, v);
  else if (key == "eval_split") {
    if (v == "balanced") cfg.eval_split = EvalSplit::balanced;
    else if (v == "labeled") cfg.eval_split = EvalSplit::labeled;
    else bad_value(key, v, "balanced or labeled");
  } else if (key == "n_validation") cfg.n_validation = parse_uint(key, v);
  else if (key == "n_test") cfg.n_test = parse_uint(key, v);
  else if (key == "separation") cfg.separation = parse_double(key, v);
  else if (key == "noise_sigma") cfg.noise_sigma = parse_double(key, v);
  else if (key == "aug_sigma") cfg.aug_sigma = parse_double(key, v);
  else if (key == "seed") cfg.seed = parse_uint(key, v);
  else throw ParameterError("unknown config key '" + std::string(key) + "'");
}

KeyValues entries(const SynthConfig& c) {
  auto u = [](std::uint64_t v) { return std::to_string(v); };
  return {
      {"classes", u(c.classes)},
      {"dim", u(c.dim)},
      {"class_names", join(c.resolved_class_names())},
      {"profile", c.profile == CountProfile::longtail ? "longtail" : "proportions"},
      {"n_max_labeled", u(c.n_max_labeled)},
      {"gamma_labeled", format_double(c.gamma_labeled)},
      {"n_max_unlabeled", u(c.n_max_unlabeled)},
      {"gamma_unlabeled", format_double(c.gamma_unlabeled)},
      {"proportions", join_numbers(c.proportions, format_double)},
      {"n_labeled", u(c.n_labeled)},
      {"n_unlabeled", u(c.n_unlabeled)},
      {"eval_split", c.eval_split == EvalSplit::balanced ? "balanced" : "labeled"},
      {"n_validation", u(c.n_validation)},
      {"n_test", u(c.n_test)},
      {"separation", format_double(c.separation)},
      {"noise_sigma", format_double(c.noise_sigma)},
      {"aug_sigma", format_double(c.aug_sigma)},
      {"seed", u(c.seed)},
  };
}

void apply(TrainConfig& cfg, const KeyValues& kv) {
  for (const auto& [k, v] : kv) set_option(cfg, k, v);
}

void apply(SynthConfig& cfg, const KeyValues& kv) {
  for (const auto& [k, v] : kv)
    if (k == "preset") set_option(cfg, k, v);
  for (const auto& [k, v] : kv)
    if (k != "preset") set_option(cfg, k, v);
}

}  // namespace qamatch
