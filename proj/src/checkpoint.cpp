#include "kmcg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "kmcg/error.hpp"

namespace kmcg {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void put_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

void put_f32(std::string& out, double v) {
  const float f = static_cast<float>(v);
  char buf[4];
  std::memcpy(buf, &f, 4);
  out.append(buf, 4);
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

  bool done() const { return pos_ == bytes_.size(); }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }
  float f32() {
    need(4);
    float v;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      fail(ErrorKind::data, fmt::format("{}: truncated checkpoint", origin_));
  }
  const std::string& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

std::string format_double(double v) { return fmt::format("{:.9g}", v); }

}  // namespace

std::string canonical_config_text(const DomainModel& dm) {
  const auto& c = dm.model.config();
  const auto& m = dm.model.metadata;
  std::string s;
  auto line = [&](const char* key, const std::string& value) {
    s += fmt::format("{}={}\n", key, value);
  };
  line("domain", dm.domain);
  line("model.input_dim", std::to_string(c.input_dim));
  line("model.cond_dim", std::to_string(c.cond_dim));
  line("model.hidden", std::to_string(c.hidden));
  line("model.blocks", std::to_string(c.blocks));
  line("model.time_dim", std::to_string(c.time_dim));
  line("model.kernel", std::to_string(c.kernel));
  line("model.cond_mode", to_string(c.cond_mode));
  line("model.keyframe_context", c.keyframe_context ? "true" : "false");
  line("model.activation", to_string(c.activation));
  line("model.seed", std::to_string(c.seed));
  line("schedule.kind", to_string(c.schedule));
  line("schedule.T", std::to_string(c.T));
  line("train.steps", std::to_string(m.steps));
  line("train.initial_loss", format_double(m.initial_loss));
  line("train.final_loss", format_double(m.final_loss));
  return s;
}

std::string serialize_checkpoint(const DomainModel& dm) {
  require(dm.normalizer.dims() == dm.model.config().input_dim, ErrorKind::contract,
          "normalizer dimension differs from model input dimension");
  std::string out(kCheckpointMagic, 6);
  out.push_back(static_cast<char>(kCheckpointVersion));
  const std::string cfg = canonical_config_text(dm);
  put_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out += cfg;

  auto tensor_header = [&](const std::string& name, std::initializer_list<Index> dims) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(dims.size()));
    for (Index d : dims) put_u32(out, static_cast<std::uint32_t>(d));
  };
  for (const auto& p : dm.model.parameters()) {
    if (p.rows == 1)
      tensor_header(p.name, {p.cols});
    else
      tensor_header(p.name, {p.rows, p.cols});
    for (Index r = 0; r < p.rows; ++r)
      for (Index c = 0; c < p.cols; ++c) put_f32(out, p.values[static_cast<std::size_t>(c * p.rows + r)]);
  }
  tensor_header("normalizer.mean", {dm.normalizer.dims()});
  for (Index i = 0; i < dm.normalizer.dims(); ++i) put_f32(out, dm.normalizer.mean()(i));
  tensor_header("normalizer.scale", {dm.normalizer.dims()});
  for (Index i = 0; i < dm.normalizer.dims(); ++i) put_f32(out, dm.normalizer.scale()(i));
  return out;
}

DomainModel deserialize_checkpoint(const std::string& bytes, const std::string& origin) {
  Reader in(bytes, origin);
  if (in.str(6) != std::string(kCheckpointMagic, 6))
    fail(ErrorKind::data, fmt::format("{}: not a KMCG01 checkpoint", origin));
  const auto version = static_cast<std::uint8_t>(in.str(1)[0]);
  if (version != kCheckpointVersion)
    fail(ErrorKind::data, fmt::format("{}: unsupported checkpoint version {}", origin, version));

  const std::string cfg_text = in.str(in.u32());
  std::map<std::string, std::string> kv;
  std::istringstream lines(cfg_text);
  std::string line;
  while (std::getline(lines, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::data, fmt::format("{}: bad config block", origin));
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) fail(ErrorKind::data, fmt::format("{}: config block lacks {}", origin, key));
    return it->second;
  };
  auto get_int = [&](const char* key) { return std::stoll(get(key)); };

  DenoiserConfig c;
  try {
    c.input_dim = static_cast<int>(get_int("model.input_dim"));
    c.cond_dim = static_cast<int>(get_int("model.cond_dim"));
    c.hidden = static_cast<int>(get_int("model.hidden"));
    c.blocks = static_cast<int>(get_int("model.blocks"));
    c.time_dim = static_cast<int>(get_int("model.time_dim"));
    c.kernel = static_cast<int>(get_int("model.kernel"));
    c.cond_mode = parse_cond_mode(get("model.cond_mode"));
    c.keyframe_context = get("model.keyframe_context") == "true";
    c.activation = parse_activation(get("model.activation"));
    c.seed = std::stoull(get("model.seed"));
    c.schedule = parse_schedule_kind(get("schedule.kind"));
    c.T = static_cast<int>(get_int("schedule.T"));
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorKind::data, fmt::format("{}: malformed config block", origin));
  }

  DomainModel dm{get("domain"), DenoiserModel(c), Normalizer()};
  dm.model.metadata.steps = static_cast<int>(get_int("train.steps"));
  dm.model.metadata.initial_loss = std::stod(get("train.initial_loss"));
  dm.model.metadata.final_loss = std::stod(get("train.final_loss"));

  auto read_tensor = [&](const std::string& expect, Index rows, Index cols,
                         std::vector<double>& dst) {
    const std::string name = in.str(in.u32());
    if (name != expect)
      fail(ErrorKind::data, fmt::format("{}: expected tensor {}, found {}", origin, expect, name));
    const std::uint32_t rank = in.u32();
    std::vector<std::uint32_t> dims(rank);
    for (auto& d : dims) d = in.u32();
    const bool ok = (rows == 1 && rank == 1 && dims[0] == cols) ||
                    (rank == 2 && dims[0] == rows && dims[1] == cols);
    if (!ok) fail(ErrorKind::data, fmt::format("{}: tensor {} has unexpected shape", origin, name));
    dst.assign(static_cast<std::size_t>(rows * cols), 0.0);
    for (Index r = 0; r < rows; ++r)
      for (Index col = 0; col < cols; ++col) dst[static_cast<std::size_t>(col * rows + r)] = in.f32();
  };

  for (auto& p : dm.model.parameters()) read_tensor(p.name, p.rows, p.cols, p.values);
  std::vector<double> mean, scale;
  read_tensor("normalizer.mean", 1, c.input_dim, mean);
  read_tensor("normalizer.scale", 1, c.input_dim, scale);
  if (!in.done()) fail(ErrorKind::data, fmt::format("{}: trailing bytes after tensors", origin));
  dm.normalizer = Normalizer(Eigen::Map<Vec>(mean.data(), c.input_dim),
                             Eigen::Map<Vec>(scale.data(), c.input_dim));
  return dm;
}

void save_checkpoint(const DomainModel& dm, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(dm);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, fmt::format("cannot write checkpoint {}", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, fmt::format("write failed for {}", path.string()));
}

DomainModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::data, fmt::format("missing checkpoint {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str(), path.string());
}

}  // namespace kmcg
