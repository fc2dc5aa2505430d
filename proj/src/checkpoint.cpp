#include "snnadv/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace snnadv {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void raw(const char* s, std::size_t n) { out_.insert(out_.end(), s, s + n); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}
  void need(std::size_t n, const char* what) {
    if (b_.size() - pos_ < n) throw FormatError(std::string("checkpoint truncated reading ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{b_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{b_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string str(const char* what) {
    std::uint32_t n = u32(what);
    need(n, what);
    std::string s(b_.begin() + static_cast<long>(pos_), b_.begin() + static_cast<long>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

nlohmann::json parse_json(const std::string& s, const char* what) {
  try {
    return nlohmann::json::parse(s);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint ") + what + " is not valid JSON: " + e.what());
  }
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Model& model, const nlohmann::json& config,
                                            std::uint64_t seed) {
  Writer w;
  w.raw("SNNM", 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(model.kind()));
  nlohmann::json arch = {{"name", model.name()}, {"architecture", model.architecture()}};
  w.str(arch.dump());
  auto params = model.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t->rank()));
    for (auto d : t->shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t->data()) w.f32(v);
  }
  w.str(config.dump());
  w.u64(seed);
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::string(bytes.begin(), bytes.begin() + 4) != "SNNM") {
    throw FormatError("not an SNNM checkpoint (bad magic)");
  }
  std::vector<std::uint8_t> body(bytes.begin() + 4, bytes.end());
  Reader r(body);
  std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  std::uint32_t kind = r.u32("kind");
  if (kind > 2) throw FormatError("unknown model kind tag " + std::to_string(kind));
  auto arch = parse_json(r.str("architecture"), "architecture");
  Checkpoint ck;
  try {
    ck.model = model_from_architecture(static_cast<ModelKind>(kind), arch.at("architecture"));
    ck.model->set_name(arch.at("name").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint architecture incomplete: ") + e.what());
  }
  auto params = ck.model->parameters();
  std::uint32_t count = r.u32("tensor count");
  if (count != params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, architecture needs " +
                      std::to_string(params.size()));
  }
  for (auto& [name, t] : params) {
    std::string stored = r.str("tensor name");
    if (stored != name) throw FormatError("checkpoint tensor '" + stored + "' where '" + name + "' expected");
    std::uint32_t rank = r.u32("tensor rank");
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(r.u32("tensor dims"));
    if (shape != t->shape()) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " + shape_string(shape) +
                        ", expected " + shape_string(t->shape()));
    }
    r.need(t->size() * 4, "tensor data");
    for (auto& v : t->data()) v = r.f32("tensor data");
  }
  ck.config = parse_json(r.str("config"), "config");
  ck.seed = r.u64("seed");
  if (!r.done()) throw FormatError("trailing bytes after checkpoint");
  return ck;
}

void save_checkpoint(const std::string& path, const Model& model, const nlohmann::json& config,
                     std::uint64_t seed) {
  auto bytes = encode_checkpoint(model, config, seed);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_checkpoint(bytes);
}

}  // namespace snnadv
