#pragma once

// Shared utilities: error checks, deterministic RNG streams, a small
// thread-pool parallel_for, FNV-1a hashing, and atomic file writes.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fredholm {

inline constexpr const char* kVersion = "0.1.0";

namespace detail {

inline void check_arg(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

inline void check_state(bool ok, const std::string& msg) {
  if (!ok) throw std::runtime_error(msg);
}

// SplitMix64 step; a compact, well-mixed 64-bit generator.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

} // namespace detail

// Deterministic RNG stream keyed by a list of integers (seed, repeat, fold,
// cell index, ...). Self-contained so sampled sequences never depend on
// standard-library distribution internals.
class RandomStream {
 public:
  explicit RandomStream(std::initializer_list<std::uint64_t> key)
      : state_(0x6C62272E07BB0142ull) {
    for (std::uint64_t part : key) {
      state_ ^= part + 0x9E3779B97F4A7C15ull + (state_ << 6) + (state_ >> 2);
      (void)detail::splitmix64(state_);
    }
  }

  std::uint64_t next_u64() { return detail::splitmix64(state_); }

  // Uniform in [0, 1).
  double uniform01() {
    return std::ldexp(static_cast<double>(next_u64() >> 11), -53);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform index in [0, n).
  std::size_t uniform_index(std::size_t n) {
    detail::check_arg(n > 0, "RandomStream::uniform_index: n must be positive");
    return static_cast<std::size_t>(next_u64() % n);
  }

  int uniform_int(int lo, int hi) { // inclusive bounds
    detail::check_arg(hi >= lo, "RandomStream::uniform_int: empty range");
    return lo + static_cast<int>(uniform_index(static_cast<std::size_t>(hi - lo + 1)));
  }

  // Standard normal via Box-Muller (u1 strictly inside (0,1)).
  double normal() {
    const double u1 = std::ldexp(static_cast<double>(next_u64() >> 11) + 0.5, -53);
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  // Fisher-Yates shuffle; deterministic for a given stream key.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_index(i)]);
    }
  }

 private:
  std::uint64_t state_;
};

// Runs body(0..count-1) on up to `jobs` threads. Each index writes only to its
// own output slot in callers, so results are independent of scheduling.
inline void parallel_for(std::size_t count, int jobs,
                         const std::function<void(std::size_t)>& body) {
  if (count == 0) return;
  std::size_t workers = jobs <= 1 ? 1 : std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (!failed.load(std::memory_order_relaxed)) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) break;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          failed.store(true, std::memory_order_relaxed);
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// FNV-1a 64-bit over a byte string; used for dataset and manifest fingerprints.
inline std::uint64_t fnv1a64(const void* data, std::size_t size,
                             std::uint64_t seed = 0xCBF29CE484222325ull) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001B3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s,
                             std::uint64_t seed = 0xCBF29CE484222325ull) {
  return fnv1a64(s.data(), s.size(), seed);
}

inline std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  detail::check_state(in.good(), "cannot open file for hashing: " + path.string());
  std::uint64_t h = 0xCBF29CE484222325ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
  }
  return h;
}

// Shortest-ish fixed formatting used in CSV output; deterministic for a value.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// Writes content to path via a temp file + rename so readers never observe a
// partially written file.
inline void atomic_write_file(const std::filesystem::path& path,
                              const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    detail::check_state(out.good(), "cannot open for writing: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    detail::check_state(out.good(), "write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

} // namespace fredholm
