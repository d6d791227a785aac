#include "sqzt/config.hpp"

#include <fstream>
#include <sstream>

namespace sqzt {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return r;
  } catch (...) {
    throw std::invalid_argument("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return r;
  } catch (...) {
    throw std::invalid_argument("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const uint64_t r = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return r;
  } catch (...) {
    throw std::invalid_argument("config: key '" + key + "' expects an unsigned integer, got '" +
                                v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

std::array<int, 4> parse_int4(const std::string& key, const std::string& v) {
  std::array<int, 4> out{};
  std::stringstream ss(v);
  std::string tok;
  size_t i = 0;
  while (std::getline(ss, tok, ',')) {
    if (i >= 4) break;
    out[i++] = parse_int(key, trim(tok));
  }
  if (i != 4 || ss.rdbuf()->in_avail() != 0) {
    throw std::invalid_argument("config: key '" + key + "' expects 4 comma-separated integers");
  }
  return out;
}

}  // namespace

void apply_config_kv(Config& cfg, const std::string& key, const std::string& value) {
  ModelConfig& m = cfg.model;
  TrainConfig& t = cfg.train;
  EvalConfig& e = cfg.eval;
  if (key == "model.frames") m.frames = parse_int(key, value);
  else if (key == "model.input_h") m.input_h = parse_int(key, value);
  else if (key == "model.input_w") m.input_w = parse_int(key, value);
  else if (key == "model.resolution") m.input_h = m.input_w = parse_int(key, value);
  else if (key == "model.channel_factor") m.channel_factor = parse_double(key, value);
  else if (key == "model.stage_blocks") m.stage_blocks = parse_int4(key, value);
  else if (key == "model.stage_channels") m.stage_channels = parse_int4(key, value);
  else if (key == "model.reduction") m.reduction = parse_double(key, value);
  else if (key == "model.num_classes") m.num_classes = parse_int(key, value);
  else if (key == "model.stem_channels") m.stem_channels = parse_int(key, value);
  else if (key == "model.ioi_temporal") m.ioi_temporal = parse_int(key, value);
  else if (key == "model.wcm_hidden_ratio") m.wcm_hidden_ratio = parse_double(key, value);
  else if (key == "model.variant") m.variant = value;
  else if (key == "train.lr0") t.lr0 = parse_double(key, value);
  else if (key == "train.warmup_epochs") t.warmup_epochs = parse_int(key, value);
  else if (key == "train.total_epochs") t.total_epochs = parse_int(key, value);
  else if (key == "train.weight_decay") t.weight_decay = parse_double(key, value);
  else if (key == "train.momentum") t.momentum = parse_double(key, value);
  else if (key == "train.batch_size") t.batch_size = parse_int(key, value);
  else if (key == "train.seed") t.seed = parse_u64(key, value);
  else if (key == "train.interval") t.interval = parse_int(key, value);
  else if (key == "train.checkpoint_every") t.checkpoint_every = parse_int(key, value);
  else if (key == "train.flip_augment") t.flip_augment = parse_bool(key, value);
  else if (key == "train.temporal_offset_augment") t.temporal_offset_augment = parse_bool(key, value);
  else if (key == "train.shuffle_frames") t.shuffle_frames = parse_bool(key, value);
  else if (key == "eval.n_clips") e.n_clips = parse_int(key, value);
  else if (key == "eval.n_crops") e.n_crops = parse_int(key, value);
  else if (key == "eval.crop_h") e.crop_h = parse_int(key, value);
  else if (key == "eval.crop_w") e.crop_w = parse_int(key, value);
  else if (key == "eval.crop") e.crop_h = e.crop_w = parse_int(key, value);
  else if (key == "eval.shuffle_frames") e.shuffle_frames = parse_bool(key, value);
  else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

Config parse_config_text(const std::string& text) {
  Config cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " is not 'key=value': '" + line + "'");
    }
    apply_config_kv(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

Config load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize_config(const Config& cfg) {
  std::ostringstream os;
  os.precision(17);
  const ModelConfig& m = cfg.model;
  const TrainConfig& t = cfg.train;
  const EvalConfig& e = cfg.eval;
  os << "model.frames=" << m.frames << "\n";
  os << "model.input_h=" << m.input_h << "\n";
  os << "model.input_w=" << m.input_w << "\n";
  os << "model.channel_factor=" << m.channel_factor << "\n";
  os << "model.stage_blocks=" << m.stage_blocks[0] << "," << m.stage_blocks[1] << ","
     << m.stage_blocks[2] << "," << m.stage_blocks[3] << "\n";
  os << "model.stage_channels=" << m.stage_channels[0] << "," << m.stage_channels[1] << ","
     << m.stage_channels[2] << "," << m.stage_channels[3] << "\n";
  os << "model.reduction=" << m.reduction << "\n";
  os << "model.num_classes=" << m.num_classes << "\n";
  os << "model.stem_channels=" << m.stem_channels << "\n";
  os << "model.ioi_temporal=" << m.ioi_temporal << "\n";
  os << "model.wcm_hidden_ratio=" << m.wcm_hidden_ratio << "\n";
  os << "model.variant=" << m.variant << "\n";
  os << "train.lr0=" << t.lr0 << "\n";
  os << "train.warmup_epochs=" << t.warmup_epochs << "\n";
  os << "train.total_epochs=" << t.total_epochs << "\n";
  os << "train.weight_decay=" << t.weight_decay << "\n";
  os << "train.momentum=" << t.momentum << "\n";
  os << "train.batch_size=" << t.batch_size << "\n";
  os << "train.seed=" << t.seed << "\n";
  os << "train.interval=" << t.interval << "\n";
  os << "train.checkpoint_every=" << t.checkpoint_every << "\n";
  os << "train.flip_augment=" << (t.flip_augment ? "true" : "false") << "\n";
  os << "train.temporal_offset_augment=" << (t.temporal_offset_augment ? "true" : "false") << "\n";
  os << "train.shuffle_frames=" << (t.shuffle_frames ? "true" : "false") << "\n";
  os << "eval.n_clips=" << e.n_clips << "\n";
  os << "eval.n_crops=" << e.n_crops << "\n";
  os << "eval.crop_h=" << e.crop_h << "\n";
  os << "eval.crop_w=" << e.crop_w << "\n";
  os << "eval.shuffle_frames=" << (e.shuffle_frames ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace sqzt
