// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#include "conlink/error.hpp"

namespace conlink {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::EmptyMention: return "EmptyMention";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::EmptyOntology: return "EmptyOntology";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::FingerprintMismatch: return "FingerprintMismatch";
    case ErrorCode::UnresolvableCandidate: return "UnresolvableCandidate";
    case ErrorCode::EmptyCandidates: return "EmptyCandidates";
    case ErrorCode::MissingFixture: return "MissingFixture";
    case ErrorCode::MissingPrediction: return "MissingPrediction";
    case ErrorCode::MissingRetrieval: return "MissingRetrieval";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Invariant: return "Invariant";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, std::string detail)
    : std::runtime_error(std::string(to_string(code))),
      code_(code),
      detail_(std::move(detail)) {
  refresh();
}

void Error::refresh() {
  message_ = std::string(to_string(code_));
  if (!detail_.empty()) message_ += ": " + detail_;
  if (line) message_ += " (line " + std::to_string(*line) + ")";
  if (index) message_ += " (index " + std::to_string(*index) + ")";
  if (status != 0) message_ += " (status " + std::to_string(status) + ")";
}

Error& Error::at_line(std::size_t l) & {
  line = l;
  refresh();
  return *this;
}

Error&& Error::at_line(std::size_t l) && {
  line = l;
  refresh();
  return std::move(*this);
}

Error&& Error::at_index(std::size_t i) && {
  index = i;
  refresh();
  return std::move(*this);
}

Error&& Error::with_status(int s) && {
  status = s;
  refresh();
  return std::move(*this);
}

bool Error::is_external() const noexcept {
  return code_ == ErrorCode::Transport || code_ == ErrorCode::Timeout ||
         code_ == ErrorCode::MissingFixture;
}

}  // namespace conlink
