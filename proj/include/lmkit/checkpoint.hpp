#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lmkit/tensor.hpp"

namespace lmkit {

// Length-prefixed named-section binary container, little-endian, FNV-1a
// checksum over the body. Writes go to a temp file renamed into place so a
// failed save never leaves a partial file visible.
//
// Layout: "LMKC" | u32 version | u64 checksum | u32 nsections |
//         { u32 name_len | name | u64 payload_len | payload }*
class SectionWriter {
 public:
  void add(const std::string& name, std::vector<uint8_t> payload);
  void add_string(const std::string& name, const std::string& s);
  void add_u64(const std::string& name, uint64_t v);
  void add_tensor(const std::string& name, const Tensor& t);
  void add_doubles(const std::string& name, const std::vector<double>& v);
  void write(const std::string& path) const;

  static constexpr uint32_t kVersion = 1;

 private:
  std::vector<std::pair<std::string, std::vector<uint8_t>>> sections_;
};

class SectionReader {
 public:
  explicit SectionReader(const std::string& path);

  bool has(const std::string& name) const { return sections_.count(name) != 0; }
  const std::vector<uint8_t>& raw(const std::string& name) const;
  std::string get_string(const std::string& name) const;
  uint64_t get_u64(const std::string& name) const;
  Tensor get_tensor(const std::string& name) const;
  std::vector<double> get_doubles(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, std::vector<uint8_t>> sections_;
};

// Whole-store convenience: every parameter's value and accumulator.
void add_parameters(SectionWriter& w, const ParameterStore& params);
void load_parameters(const SectionReader& r, ParameterStore& params);

// Copies value+accumulator for every destination parameter that exists (with
// the same shape) in the source; used to warm-start a new head from a trained
// base model.
void copy_matching_parameters(const ParameterStore& src, ParameterStore& dst);

}  // namespace lmkit
