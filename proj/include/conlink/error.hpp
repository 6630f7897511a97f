// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace conlink {

enum class ErrorCode {
  // ontology / query files
  DuplicateId,
  MissingField,
  EmptyFile,
  MalformedRecord,
  EmptyMention,
  UnknownId,
  // embedding
  EmptyText,
  DimMismatch,
  Transport,
  Timeout,
  BudgetExceeded,
  // memory
  EmptyOntology,
  BadMagic,
  VersionMismatch,
  FingerprintMismatch,
  // ranker
  UnresolvableCandidate,
  EmptyCandidates,
  MissingFixture,
  // evaluation
  MissingPrediction,
  MissingRetrieval,
  // plumbing
  Config,
  Io,
  Invariant,
};

std::string_view to_string(ErrorCode code);

/// The single exception type thrown by the library. Carries a machine-readable
/// code plus whichever location details apply (file line, batch index, HTTP
/// status).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string detail);

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

  std::optional<std::size_t> line;
  std::optional<std::size_t> index;
  int status = 0;

  Error& at_line(std::size_t l) &;
  Error&& at_line(std::size_t l) &&;
  Error&& at_index(std::size_t i) &&;
  Error&& with_status(int s) &&;

  /// True for failures caused by something outside the process (network,
  /// remote service), as opposed to bad input or a broken invariant.
  bool is_external() const noexcept;

  const char* what() const noexcept override { return message_.c_str(); }

 private:
  void refresh();

  ErrorCode code_;
  std::string detail_;
  std::string message_;
};

}  // namespace conlink
