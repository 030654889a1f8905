#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace facepipe {

/// FNV-1a 64-bit over arbitrary bytes. Used for seed derivation and as the
/// content fingerprint in transcripts/ledgers (not a cryptographic hash).
std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view s);

/// Combines a global seed with an identity id so per-identity streams are
/// independent of processing order.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view identity_id);

std::string to_hex(std::uint64_t v);

std::string base64_encode(std::span<const std::uint8_t> data);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> data);
std::string read_file_text(const std::filesystem::path& path);
void write_file_text(const std::filesystem::path& path, std::string_view text);

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware
/// concurrency). Exceptions are captured and the first one is rethrown after
/// all workers finish.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& fn);

} // namespace facepipe
