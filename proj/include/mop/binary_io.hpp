#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mop {

// Little-endian scalar I/O for the MOPD/MOPM containers. The formats are
// defined little-endian; big-endian hosts are rejected rather than silently
// byte-swapped.
static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; this build targets LE hosts");

inline void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline std::uint32_t read_u32(std::istream& in, const char* what) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::invalid_argument(std::string("truncated read: ") + what);
  return v;
}

inline std::uint64_t read_u64(std::istream& in, const char* what) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::invalid_argument(std::string("truncated read: ") + what);
  return v;
}

inline double read_f64(std::istream& in, const char* what) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::invalid_argument(std::string("truncated read: ") + what);
  return v;
}

template <typename T>
void write_array(std::ostream& out, const std::vector<T>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
void read_array(std::istream& in, std::vector<T>& v, std::size_t count, const char* what) {
  v.resize(count);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(count * sizeof(T)));
  if (!in) throw std::invalid_argument(std::string("truncated read: ") + what);
}

inline void expect_magic(std::istream& in, const char magic[4], const std::string& path) {
  char buf[4] = {};
  in.read(buf, 4);
  if (!in || buf[0] != magic[0] || buf[1] != magic[1] || buf[2] != magic[2] || buf[3] != magic[3])
    throw std::invalid_argument("bad magic in " + path);
}

}  // namespace mop
