#pragma once

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dss/error.hpp"
#include "dss/scenario.hpp"
#include "dss/training.hpp"

namespace dss {

// ---------------------------------------------------------------------------
// Flat `key = value` text. '#' starts a comment; dotted keys name nested fields.

using KeyValues = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

inline KeyValues parse_key_values(std::string_view text, const std::string& source = "config") {
  KeyValues out;
  std::map<std::string, int> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::size_t len = nl == std::string_view::npos ? std::string_view::npos : nl - pos;
    std::string_view line = text.substr(pos, len);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    const std::string where = source + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected `key = value`");
    std::string key = detail::trim(std::string_view(t).substr(0, eq));
    std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (auto [it, fresh] = seen.emplace(key, line_no); !fresh)
      throw ConfigError(where + ": duplicate key `" + key + "` (first on line " +
                        std::to_string(it->second) + ")");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

inline long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(key + ": expected an integer, got `" + v + "`");
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError(key + ": expected a finite number, got `" + v + "`");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got `" + v + "`");
}

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

// ---------------------------------------------------------------------------
// Scenario files

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline int parse_index(const std::string& key, const std::string& part, int limit) {
  const auto i = parse_int(key, part);
  if (i < 0 || i > limit) throw ConfigError(key + ": index out of range");
  return static_cast<int>(i);
}

}  // namespace detail

/// Sets one scenario field from a dotted key (without any `scenario.` prefix).
/// Returns false for keys that are not scenario fields.
inline bool apply_scenario_key(ScenarioConfig& s, const std::string& key, const std::string& v) {
  const auto parts = detail::split(key, '.');
  const std::string& head = parts[0];
  if (parts.size() == 1) {
    if (head == "name") s.name = v;
    else if (head == "action_count") s.action_count = static_cast<int>(parse_int(key, v));
    else if (head == "episode_length") s.episode_length = static_cast<int>(parse_int(key, v));
    else if (head == "window") s.window = static_cast<int>(parse_int(key, v));
    else if (head == "rayleigh_fading") s.rayleigh_fading = parse_bool(key, v);
    else if (head == "mbsfn_pattern") {
      s.mbsfn_pattern.clear();
      if (!v.empty())
        for (const auto& f : detail::split(v, ',')) s.mbsfn_pattern.push_back(parse_bool(key, f));
    } else return false;
    return true;
  }
  if (head == "radio" && parts.size() == 2) {
    auto& r = s.radio;
    const auto& f = parts[1];
    if (f == "carrier_freq_ghz") r.carrier_freq_ghz = parse_double(key, v);
    else if (f == "total_prbs") r.total_prbs = static_cast<int>(parse_int(key, v));
    else if (f == "prb_bandwidth_hz") r.prb_bandwidth_hz = parse_double(key, v);
    else if (f == "tx_power_per_prb_w") r.tx_power_per_prb_w = parse_double(key, v);
    else if (f == "noise_power_per_prb_dbm") r.noise_power_per_prb_dbm = parse_double(key, v);
    else if (f == "spectral_efficiency_cap") r.spectral_efficiency_cap = parse_double(key, v);
    else throw ConfigError("unknown scenario key `" + key + "`");
    return true;
  }
  if (head == "user" && parts.size() == 3) {
    const int i = detail::parse_index(key, parts[1], 63);
    while (static_cast<int>(s.users.size()) <= i) {
      UserConfig u;
      u.user_id = static_cast<int>(s.users.size());
      s.users.push_back(u);
    }
    auto& u = s.users[static_cast<std::size_t>(i)];
    const auto& f = parts[2];
    if (f == "rat") {
      if (v == "NR" || v == "nr") u.rat = Rat::NR;
      else if (v == "LTE" || v == "lte") u.rat = Rat::LTE;
      else throw ConfigError(key + ": expected NR or LTE, got `" + v + "`");
    } else if (f == "arrival_period") u.arrival_period = static_cast<int>(parse_int(key, v));
    else if (f == "packet_bits") u.packet_bits = parse_int(key, v);
    else if (f == "first_arrival") u.first_arrival = static_cast<int>(parse_int(key, v));
    else if (f == "step_delay") u.step_delay = static_cast<int>(parse_int(key, v));
    else if (f == "step_weight") u.step_weight = parse_double(key, v);
    else if (f == "weight_slope") u.weight_slope = parse_double(key, v);
    else if (f == "distance_m") u.distance_m = parse_double(key, v);
    else if (f == "bits_per_prb") {
      if (v == "none") u.bits_per_prb_override.reset();
      else u.bits_per_prb_override = parse_double(key, v);
    } else if (f == "bits_per_prb_alone") {
      if (v == "none") u.bits_per_prb_alone_override.reset();
      else u.bits_per_prb_alone_override = parse_double(key, v);
    } else throw ConfigError("unknown scenario key `" + key + "`");
    return true;
  }
  if (head == "interference" && parts.size() == 3) {
    const int i = detail::parse_index(key, parts[1], 63);
    while (static_cast<int>(s.interference.size()) <= i) s.interference.emplace_back();
    auto& ip = s.interference[static_cast<std::size_t>(i)];
    const auto& f = parts[2];
    if (f == "user") ip.user = static_cast<int>(parse_int(key, v));
    else if (f == "period") ip.period = static_cast<int>(parse_int(key, v));
    else if (f == "phase") ip.phase = static_cast<int>(parse_int(key, v));
    else throw ConfigError("unknown scenario key `" + key + "`");
    return true;
  }
  if (head == "user" || head == "radio" || head == "interference")
    throw ConfigError("unknown scenario key `" + key + "`");
  return false;
}

/// Parses a scenario file. `base = <1..4>` starts from a built-in scenario;
/// other keys override it.
inline ScenarioConfig scenario_from_text(std::string_view text, const std::string& source = "scenario") {
  const auto kv = parse_key_values(text, source);
  ScenarioConfig s;
  s.users.clear();
  for (const auto& [k, v] : kv)
    if (k == "base") s = build_scenario(static_cast<int>(parse_int(k, v)));
  for (const auto& [k, v] : kv) {
    if (k == "base") continue;
    if (!apply_scenario_key(s, k, v)) throw ConfigError(source + ": unknown scenario key `" + k + "`");
  }
  s.validate();
  return s;
}

inline std::string scenario_to_text(const ScenarioConfig& s) {
  std::ostringstream o;
  o << "name = " << s.name << "\n";
  o << "action_count = " << s.action_count << "\n";
  o << "episode_length = " << s.episode_length << "\n";
  o << "window = " << s.window << "\n";
  o << "rayleigh_fading = " << (s.rayleigh_fading ? "true" : "false") << "\n";
  o << "mbsfn_pattern = ";
  for (std::size_t i = 0; i < s.mbsfn_pattern.size(); ++i)
    o << (i ? "," : "") << (s.mbsfn_pattern[i] ? 1 : 0);
  o << "\n";
  const auto& r = s.radio;
  o << "radio.carrier_freq_ghz = " << format_double(r.carrier_freq_ghz) << "\n";
  o << "radio.total_prbs = " << r.total_prbs << "\n";
  o << "radio.prb_bandwidth_hz = " << format_double(r.prb_bandwidth_hz) << "\n";
  o << "radio.tx_power_per_prb_w = " << format_double(r.tx_power_per_prb_w) << "\n";
  o << "radio.noise_power_per_prb_dbm = " << format_double(r.noise_power_per_prb_dbm) << "\n";
  o << "radio.spectral_efficiency_cap = " << format_double(r.spectral_efficiency_cap) << "\n";
  for (const auto& u : s.users) {
    const std::string p = "user." + std::to_string(u.user_id) + ".";
    o << p << "rat = " << (u.rat == Rat::NR ? "NR" : "LTE") << "\n";
    o << p << "arrival_period = " << u.arrival_period << "\n";
    o << p << "packet_bits = " << u.packet_bits << "\n";
    o << p << "first_arrival = " << u.first_arrival << "\n";
    o << p << "step_delay = " << u.step_delay << "\n";
    o << p << "step_weight = " << format_double(u.step_weight) << "\n";
    o << p << "weight_slope = " << format_double(u.weight_slope) << "\n";
    o << p << "distance_m = " << format_double(u.distance_m) << "\n";
    o << p << "bits_per_prb = "
      << (u.bits_per_prb_override ? format_double(*u.bits_per_prb_override) : "none") << "\n";
    o << p << "bits_per_prb_alone = "
      << (u.bits_per_prb_alone_override ? format_double(*u.bits_per_prb_alone_override) : "none")
      << "\n";
  }
  for (std::size_t i = 0; i < s.interference.size(); ++i) {
    const std::string p = "interference." + std::to_string(i) + ".";
    o << p << "user = " << s.interference[i].user << "\n";
    o << p << "period = " << s.interference[i].period << "\n";
    o << p << "phase = " << s.interference[i].phase << "\n";
  }
  return o.str();
}

/// Sets one hyperparameter (key without the `train.` prefix); false if unknown.
inline bool apply_train_key(TrainHyperparams& hp, const std::string& key, const std::string& v) {
  auto as_int = [&] { return static_cast<int>(parse_int(key, v)); };
  if (key == "iterations") hp.iterations = as_int();
  else if (key == "episodes") hp.episodes = as_int();
  else if (key == "simulations") hp.simulations = as_int();
  else if (key == "train_steps") hp.train_steps = as_int();
  else if (key == "batch_size") hp.batch_size = as_int();
  else if (key == "unroll") hp.unroll = as_int();
  else if (key == "td_steps") hp.td_steps = as_int();
  else if (key == "discount") hp.discount = parse_double(key, v);
  else if (key == "learning_rate") hp.learning_rate = parse_double(key, v);
  else if (key == "window") hp.window = as_int();
  else if (key == "replay_capacity") hp.replay_capacity = as_int();
  else if (key == "temperature") hp.temperature = parse_double(key, v);
  else if (key == "clip_norm") hp.clip_norm = parse_double(key, v);
  else if (key == "dynamics_gradient_scale") hp.dynamics_gradient_scale = parse_double(key, v);
  else if (key == "root_noise") hp.root_noise = parse_bool(key, v);
  else if (key == "state_dim") hp.state_dim = as_int();
  else if (key == "hidden") hp.hidden = as_int();
  else if (key == "workers") hp.workers = as_int();
  else if (key == "randomize") hp.randomize = parse_bool(key, v);
  else return false;
  return true;
}

inline std::string train_to_text(const TrainHyperparams& hp) {
  std::ostringstream o;
  o << "train.iterations = " << hp.iterations << "\n"
    << "train.episodes = " << hp.episodes << "\n"
    << "train.simulations = " << hp.simulations << "\n"
    << "train.train_steps = " << hp.train_steps << "\n"
    << "train.batch_size = " << hp.batch_size << "\n"
    << "train.unroll = " << hp.unroll << "\n"
    << "train.td_steps = " << hp.td_steps << "\n"
    << "train.discount = " << format_double(hp.discount) << "\n"
    << "train.learning_rate = " << format_double(hp.learning_rate) << "\n"
    << "train.window = " << hp.window << "\n"
    << "train.replay_capacity = " << hp.replay_capacity << "\n"
    << "train.temperature = " << format_double(hp.temperature) << "\n"
    << "train.clip_norm = " << format_double(hp.clip_norm) << "\n"
    << "train.dynamics_gradient_scale = " << format_double(hp.dynamics_gradient_scale) << "\n"
    << "train.root_noise = " << (hp.root_noise ? "true" : "false") << "\n"
    << "train.state_dim = " << hp.state_dim << "\n"
    << "train.hidden = " << hp.hidden << "\n"
    << "train.workers = " << hp.workers << "\n"
    << "train.randomize = " << (hp.randomize ? "true" : "false") << "\n";
  return o.str();
}

// ---------------------------------------------------------------------------
// Content hash

/// Git blob id: SHA-1 of "blob <size>\0" + content, lowercase hex.
inline std::string git_blob_sha1(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::runtime_error("sha1: EVP_MD_CTX_new failed");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, md, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("sha1: digest failed");
  std::ostringstream o;
  for (unsigned int i = 0; i < len; ++i)
    o << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return o.str();
}

// ---------------------------------------------------------------------------
// scores.csv

inline constexpr int kScoresVersion = 1;
inline constexpr std::string_view kScoresHeader =
    "iteration,scenario,agent,seed,eval_score,train_loss,wall_ms";

struct ScoreRow {
  int iteration = 0;
  std::string scenario;
  std::string agent;
  std::uint64_t seed = 0;
  double eval_score = 0.0;
  double train_loss = 0.0;
  double wall_ms = 0.0;
};

inline std::string scores_preamble() {
  return "# scores-version " + std::to_string(kScoresVersion) + "\n" + std::string(kScoresHeader) + "\n";
}

inline std::string format_score_row(const ScoreRow& r) {
  return std::to_string(r.iteration) + "," + r.scenario + "," + r.agent + "," + std::to_string(r.seed) +
         "," + format_double(r.eval_score) + "," + format_double(r.train_loss) + "," +
         format_double(r.wall_ms) + "\n";
}

inline std::vector<ScoreRow> parse_scores(std::string_view text, const std::string& source = "scores.csv") {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("# scores-version ", 0) != 0)
    throw FormatError(source + ": missing `# scores-version` line");
  const std::string ver = line.substr(17);
  if (ver != std::to_string(kScoresVersion))
    throw FormatError(source + ": unsupported scores version `" + ver + "` (expected " +
                      std::to_string(kScoresVersion) + ")");
  if (!std::getline(in, line) || line != kScoresHeader)
    throw FormatError(source + ": unexpected column header");
  std::vector<ScoreRow> rows;
  int n = 2;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    const std::string where = source + ":" + std::to_string(n);
    if (f.size() != 7) throw FormatError(where + ": expected 7 fields");
    ScoreRow r;
    try {
      r.iteration = static_cast<int>(parse_int("iteration", f[0]));
      r.scenario = f[1];
      r.agent = f[2];
      r.seed = static_cast<std::uint64_t>(parse_int("seed", f[3]));
      r.eval_score = parse_double("eval_score", f[4]);
      r.train_loss = f[5] == "nan" ? std::nan("") : parse_double("train_loss", f[5]);
      r.wall_ms = parse_double("wall_ms", f[6]);
    } catch (const ConfigError& e) {
      throw FormatError(where + ": " + e.what());
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Evaluation comparison csv

inline constexpr int kEvalVersion = 1;
inline constexpr std::string_view kEvalHeader = "scenario,agent,seed,score,actions";

// ---------------------------------------------------------------------------
// Run directories and logs

/// Creates `dir` (parents allowed); fails if it already exists so runs never
/// overwrite each other.
inline void create_run_directory(const std::filesystem::path& dir) {
  if (dir.has_parent_path()) std::filesystem::create_directories(dir.parent_path());
  std::error_code ec;
  if (!std::filesystem::create_directory(dir, ec)) {
    if (ec) throw ConfigError("cannot create run directory " + dir.string() + ": " + ec.message());
    throw ConfigError("run directory already exists: " + dir.string());
  }
}

/// Writes a whole file via a temporary and rename.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// Appends one JSON object per line.
class JsonlLogger {
 public:
  JsonlLogger() = default;
  explicit JsonlLogger(const std::filesystem::path& path) : out_(path, std::ios::app) {
    if (!out_) throw std::runtime_error("cannot open log " + path.string());
  }
  void log(const std::string& event, nlohmann::json fields = nlohmann::json::object()) {
    if (!out_.is_open()) return;
    fields["event"] = event;
    out_ << fields.dump() << "\n";
    out_.flush();
  }

 private:
  std::ofstream out_;
};

}  // namespace dss
