#pragma once

#include <cstddef>
#include <functional>
#include <string>

namespace shslab {

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Worker cap for internal parallelism. Initialized from SHS_LAB_THREADS when set,
/// otherwise hardware concurrency.
std::size_t max_threads();
void set_max_threads(std::size_t n);

/// Runs fn(i) for i in [0, n) on up to max_threads() threads. Each index runs exactly
/// once; callers write results into pre-sized slots so ordering stays deterministic.
/// If tasks throw, the exception of the lowest failing index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace shslab
