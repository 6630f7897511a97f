// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "conlink/http.hpp"

namespace conlink {

/// Unit-norm embedding. Stored as float32, which is also the on-disk width.
using Vector = std::vector<float>;

inline constexpr std::string_view kLocalProvider = "local-trigram";
inline constexpr std::string_view kRemoteProvider = "remote";

struct ProviderSpec {
  std::string provider_id{kLocalProvider};
  std::string model_id = "fnv1a-trigram";
  std::size_t dim = 256;
  std::optional<std::string> endpoint;
  std::chrono::milliseconds timeout{std::chrono::seconds(30)};
  std::uint64_t seed = 0;  // local provider only

  bool is_remote() const { return provider_id == kRemoteProvider; }
  /// Throws Config when dim is zero, or the endpoint presence disagrees with
  /// the provider kind, or the provider id is unknown.
  void validate() const;
  std::string fingerprint() const { return provider_id + "/" + model_id; }
};

/// Normalization applied to every text before embedding or cache lookup.
std::string normalize_for_embedding(std::string_view text);

/// Deterministic offline embedder: lowercase, pad with one space on each
/// side, hash every byte trigram with FNV-1a (seed folded into the offset
/// basis), bucket by hash mod dim, count, L2-normalize.
Vector local_embed(std::string_view text, std::size_t dim, std::uint64_t seed = 0);

double l2_norm(std::span<const float> v);

class Embedder {
 public:
  virtual ~Embedder() = default;

  virtual const ProviderSpec& spec() const = 0;

  Vector embed_text(std::string_view text);
  /// Element i equals embed_text(texts[i]). All-or-nothing: any failure
  /// throws (annotated with the failing index) and nothing is cached.
  std::vector<Vector> embed_batch(std::span<const std::string> texts);

 protected:
  /// Receives already-normalized, non-empty texts.
  virtual std::vector<Vector> embed_normalized(std::span<const std::string> texts) = 0;
};

class LocalEmbedder final : public Embedder {
 public:
  explicit LocalEmbedder(ProviderSpec spec);
  const ProviderSpec& spec() const override { return spec_; }

 protected:
  std::vector<Vector> embed_normalized(std::span<const std::string> texts) override;

 private:
  ProviderSpec spec_;
};

/// Generic JSON embedding endpoint: POST {"model", "input": [...]} and read
/// {"data": [{"embedding": [...]}, ...]}.
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(ProviderSpec spec, std::shared_ptr<HttpTransport> transport,
                 RetryPolicy retry = {}, std::size_t max_batch = 64);
  const ProviderSpec& spec() const override { return spec_; }

 protected:
  std::vector<Vector> embed_normalized(std::span<const std::string> texts) override;

 private:
  std::vector<Vector> request(std::span<const std::string> texts, std::size_t offset);

  ProviderSpec spec_;
  std::shared_ptr<HttpTransport> transport_;
  RetryPolicy retry_;
  std::size_t max_batch_;
};

/// Append-only on-disk map from SHA-256 key to vector; one file per key with
/// a 16-byte header ("LFV1", u32 dim, 8 reserved bytes) then little-endian
/// float32 values.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path dir);

  static std::string key(std::string_view provider_id, std::string_view model_id,
                         std::string_view normalized_text);

  std::optional<Vector> get(const std::string& key) const;
  /// No-op when the key already exists.
  void put(const std::string& key, const Vector& v);

  const std::filesystem::path& dir() const { return dir_; }

  static std::string encode(const Vector& v);
  static Vector decode(std::string_view bytes);

 private:
  std::filesystem::path file_for(const std::string& key) const;

  std::filesystem::path dir_;
  mutable std::shared_mutex mutex_;
};

class CachedEmbedder final : public Embedder {
 public:
  CachedEmbedder(std::unique_ptr<Embedder> inner, std::shared_ptr<EmbeddingCache> cache);
  const ProviderSpec& spec() const override { return inner_->spec(); }

  std::size_t hits() const { return hits_.load(); }
  std::size_t misses() const { return misses_.load(); }

 protected:
  std::vector<Vector> embed_normalized(std::span<const std::string> texts) override;

 private:
  std::unique_ptr<Embedder> inner_;
  std::shared_ptr<EmbeddingCache> cache_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

/// Builds the embedder a spec describes, wrapped in a cache when `cache_dir`
/// is given. `transport` is used for remote providers (defaults to httplib).
std::unique_ptr<Embedder> make_embedder(const ProviderSpec& spec,
                                        const std::optional<std::filesystem::path>& cache_dir = {},
                                        std::shared_ptr<HttpTransport> transport = nullptr,
                                        RetryPolicy retry = {});

}  // namespace conlink
