#include "lmkit/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lmkit {

namespace {

constexpr char kMagic[4] = {'L', 'M', 'K', 'C'};

uint64_t fnv1a(const uint8_t* data, size_t n, uint64_t h = 1469598103934665603ULL) {
  for (size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 1099511628211ULL;
  }
  return h;
}

template <typename T>
void put(std::vector<uint8_t>& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));  // host is little-endian
}

template <typename T>
T take(const std::vector<uint8_t>& in, size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw std::runtime_error("checkpoint: truncated section");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void SectionWriter::add(const std::string& name, std::vector<uint8_t> payload) {
  sections_.emplace_back(name, std::move(payload));
}

void SectionWriter::add_string(const std::string& name, const std::string& s) {
  add(name, std::vector<uint8_t>(s.begin(), s.end()));
}

void SectionWriter::add_u64(const std::string& name, uint64_t v) {
  std::vector<uint8_t> p;
  put(p, v);
  add(name, std::move(p));
}

void SectionWriter::add_tensor(const std::string& name, const Tensor& t) {
  std::vector<uint8_t> p;
  put(p, static_cast<uint32_t>(t.shape().size()));
  for (long d : t.shape()) put(p, static_cast<uint64_t>(d));
  size_t off = p.size();
  p.resize(off + static_cast<size_t>(t.size()) * sizeof(double));
  std::memcpy(p.data() + off, t.data(), static_cast<size_t>(t.size()) * sizeof(double));
  add(name, std::move(p));
}

void SectionWriter::add_doubles(const std::string& name, const std::vector<double>& v) {
  std::vector<uint8_t> p(v.size() * sizeof(double));
  std::memcpy(p.data(), v.data(), p.size());
  add(name, std::move(p));
}

void SectionWriter::write(const std::string& path) const {
  std::vector<uint8_t> body;
  put(body, static_cast<uint32_t>(sections_.size()));
  for (const auto& [name, payload] : sections_) {
    put(body, static_cast<uint32_t>(name.size()));
    body.insert(body.end(), name.begin(), name.end());
    put(body, static_cast<uint64_t>(payload.size()));
    body.insert(body.end(), payload.begin(), payload.end());
  }
  uint64_t sum = fnv1a(body.data(), body.size());

  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint save: cannot open " + tmp);
    out.write(kMagic, 4);
    uint32_t ver = kVersion;
    out.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
    out.write(reinterpret_cast<const char*>(&sum), sizeof(sum));
    out.write(reinterpret_cast<const char*>(body.data()),
              static_cast<std::streamsize>(body.size()));
    if (!out) throw std::runtime_error("checkpoint save: write failed on " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("checkpoint save: rename failed for " + path);
  }
}

SectionReader::SectionReader(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint load: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint load: bad magic in " + path);
  uint32_t ver = 0;
  in.read(reinterpret_cast<char*>(&ver), sizeof(ver));
  if (ver != SectionWriter::kVersion)
    throw std::runtime_error("checkpoint load: version " + std::to_string(ver) +
                             " unsupported (expected " +
                             std::to_string(SectionWriter::kVersion) + ")");
  uint64_t sum = 0;
  in.read(reinterpret_cast<char*>(&sum), sizeof(sum));
  std::vector<uint8_t> body((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
  if (fnv1a(body.data(), body.size()) != sum)
    throw std::runtime_error("checkpoint load: checksum mismatch in " + path);

  size_t pos = 0;
  uint32_t n = take<uint32_t>(body, pos);
  for (uint32_t i = 0; i < n; ++i) {
    uint32_t nl = take<uint32_t>(body, pos);
    if (pos + nl > body.size()) throw std::runtime_error("checkpoint load: truncated name");
    std::string name(body.begin() + static_cast<long>(pos),
                     body.begin() + static_cast<long>(pos + nl));
    pos += nl;
    uint64_t pl = take<uint64_t>(body, pos);
    if (pos + pl > body.size()) throw std::runtime_error("checkpoint load: truncated payload");
    sections_[name] = std::vector<uint8_t>(body.begin() + static_cast<long>(pos),
                                           body.begin() + static_cast<long>(pos + pl));
    pos += pl;
  }
}

const std::vector<uint8_t>& SectionReader::raw(const std::string& name) const {
  auto it = sections_.find(name);
  if (it == sections_.end()) throw std::runtime_error("checkpoint: missing section " + name);
  return it->second;
}

std::string SectionReader::get_string(const std::string& name) const {
  const auto& p = raw(name);
  return std::string(p.begin(), p.end());
}

uint64_t SectionReader::get_u64(const std::string& name) const {
  const auto& p = raw(name);
  size_t pos = 0;
  return take<uint64_t>(p, pos);
}

Tensor SectionReader::get_tensor(const std::string& name) const {
  const auto& p = raw(name);
  size_t pos = 0;
  uint32_t rank = take<uint32_t>(p, pos);
  std::vector<long> shape;
  for (uint32_t i = 0; i < rank; ++i) shape.push_back(static_cast<long>(take<uint64_t>(p, pos)));
  Tensor t(shape);
  if (pos + static_cast<size_t>(t.size()) * sizeof(double) != p.size())
    throw std::runtime_error("checkpoint: tensor size mismatch in section " + name);
  std::memcpy(t.data(), p.data() + pos, static_cast<size_t>(t.size()) * sizeof(double));
  return t;
}

std::vector<double> SectionReader::get_doubles(const std::string& name) const {
  const auto& p = raw(name);
  if (p.size() % sizeof(double) != 0)
    throw std::runtime_error("checkpoint: bad doubles section " + name);
  std::vector<double> v(p.size() / sizeof(double));
  std::memcpy(v.data(), p.data(), p.size());
  return v;
}

std::vector<std::string> SectionReader::names() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : sections_) out.push_back(k);
  return out;
}

void add_parameters(SectionWriter& w, const ParameterStore& params) {
  for (const auto& p : params) {
    w.add_tensor("param:" + p->name, p->value);
    w.add_tensor("accum:" + p->name, p->accum);
  }
}

void load_parameters(const SectionReader& r, ParameterStore& params) {
  for (auto& p : params) {
    Tensor v = r.get_tensor("param:" + p->name);
    Tensor a = r.get_tensor("accum:" + p->name);
    check_same_shape(p->value, v, "load_parameters");
    p->value = std::move(v);
    p->accum = std::move(a);
  }
}

void copy_matching_parameters(const ParameterStore& src, ParameterStore& dst) {
  for (auto& p : dst) {
    if (!src.has(p->name)) continue;
    const Parameter& s = src.get(p->name);
    check_same_shape(p->value, s.value, "copy_matching_parameters");
    p->value = s.value;
    p->accum = s.accum;
  }
}

}  // namespace lmkit
