// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace conlink {

/// Trims leading/trailing whitespace and collapses every internal whitespace
/// run to a single space.
std::string normalize_whitespace(std::string_view text);

/// ASCII-only lowercasing; non-ASCII bytes pass through unchanged.
std::string to_lower_ascii(std::string_view text);

/// Cuts `text` to at most `max_chars` bytes, ending at the last whole word.
/// Text already within budget is returned unchanged. If the first word alone
/// exceeds the budget the cut falls on the last UTF-8 boundary instead.
std::string truncate_at_word(std::string_view text, std::size_t max_chars);

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t basis = kFnvOffsetBasis);

/// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);

/// Shortest fixed formatting used in every file we write: 9 significant
/// digits, enough to round-trip any float.
std::string format_float9(double value);

/// Fixed-point formatting with `decimals` digits after the point.
std::string format_fixed(double value, int decimals);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file then renames over `path`, so readers never
/// observe a partially written file.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);

std::string sha256_file(const std::filesystem::path& path);

std::vector<std::string> split(std::string_view text, char sep);

}  // namespace conlink
