// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#include "conlink/embedding.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <mutex>

#include "conlink/error.hpp"
#include "conlink/text.hpp"
#include "json.hpp"

namespace conlink {

namespace {

constexpr std::size_t kMinLocalDim = 16;
constexpr char kCacheMagic[4] = {'L', 'F', 'V', '1'};
constexpr std::size_t kCacheHeaderSize = 16;

void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32_le(std::string_view bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  }
  return v;
}

Vector to_unit(const std::vector<double>& raw) {
  double sq = 0.0;
  for (double x : raw) sq += x * x;
  if (sq <= 0.0) throw Error(ErrorCode::Invariant, "zero-norm embedding");
  const double norm = std::sqrt(sq);
  Vector out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = static_cast<float>(raw[i] / norm);
  return out;
}

}  // namespace

void ProviderSpec::validate() const {
  if (dim == 0) throw Error(ErrorCode::Config, "embedding dim must be positive");
  if (provider_id == kLocalProvider) {
    if (dim < kMinLocalDim) {
      throw Error(ErrorCode::Config, "local embedder needs dim >= 16");
    }
    if (endpoint) throw Error(ErrorCode::Config, "local provider takes no endpoint");
  } else if (provider_id == kRemoteProvider) {
    if (!endpoint || endpoint->empty()) {
      throw Error(ErrorCode::Config, "remote provider requires an endpoint");
    }
  } else {
    throw Error(ErrorCode::Config, "unknown provider '" + provider_id + "'");
  }
}

std::string normalize_for_embedding(std::string_view text) {
  return normalize_whitespace(text);
}

Vector local_embed(std::string_view text, std::size_t dim, std::uint64_t seed) {
  if (dim < kMinLocalDim) throw Error(ErrorCode::Config, "local embedder needs dim >= 16");
  auto normalized = normalize_for_embedding(text);
  if (normalized.empty()) throw Error(ErrorCode::EmptyText, "");

  const std::string padded = " " + to_lower_ascii(normalized) + " ";
  std::vector<double> counts(dim, 0.0);
  const std::uint64_t basis = kFnvOffsetBasis ^ seed;
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    auto h = fnv1a64(std::string_view(padded).substr(i, 3), basis);
    counts[h % dim] += 1.0;
  }
  return to_unit(counts);
}

double l2_norm(std::span<const float> v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  return std::sqrt(sq);
}

// Embedder

Vector Embedder::embed_text(std::string_view text) {
  std::string one(text);
  return std::move(embed_batch(std::span<const std::string>(&one, 1)).front());
}

std::vector<Vector> Embedder::embed_batch(std::span<const std::string> texts) {
  std::vector<std::string> normalized;
  normalized.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    normalized.push_back(normalize_for_embedding(texts[i]));
    if (normalized.back().empty()) throw Error(ErrorCode::EmptyText, "").at_index(i);
  }
  if (normalized.empty()) return {};

  auto out = embed_normalized(normalized);
  if (out.size() != normalized.size()) {
    throw Error(ErrorCode::Invariant, "provider returned " + std::to_string(out.size()) +
                                          " vectors for " + std::to_string(normalized.size()) +
                                          " texts");
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].size() != spec().dim) {
      throw Error(ErrorCode::DimMismatch, "expected " + std::to_string(spec().dim) + ", got " +
                                              std::to_string(out[i].size()))
          .at_index(i);
    }
  }
  return out;
}

// LocalEmbedder

LocalEmbedder::LocalEmbedder(ProviderSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  if (spec_.is_remote()) throw Error(ErrorCode::Config, "LocalEmbedder given a remote spec");
}

std::vector<Vector> LocalEmbedder::embed_normalized(std::span<const std::string> texts) {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(local_embed(t, spec_.dim, spec_.seed));
  return out;
}

// RemoteEmbedder

RemoteEmbedder::RemoteEmbedder(ProviderSpec spec, std::shared_ptr<HttpTransport> transport,
                               RetryPolicy retry, std::size_t max_batch)
    : spec_(std::move(spec)),
      transport_(std::move(transport)),
      retry_(std::move(retry)),
      max_batch_(std::max<std::size_t>(1, max_batch)) {
  spec_.validate();
  if (!spec_.is_remote()) throw Error(ErrorCode::Config, "RemoteEmbedder given a local spec");
  if (!transport_) transport_ = std::make_shared<HttplibTransport>();
}

std::vector<Vector> RemoteEmbedder::embed_normalized(std::span<const std::string> texts) {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += max_batch_) {
    auto chunk = texts.subspan(start, std::min(max_batch_, texts.size() - start));
    auto vecs = request(chunk, start);
    for (auto& v : vecs) out.push_back(std::move(v));
  }
  return out;
}

std::vector<Vector> RemoteEmbedder::request(std::span<const std::string> texts,
                                            std::size_t offset) {
  nlohmann::json body;
  body["model"] = spec_.model_id;
  body["input"] = nlohmann::json::array();
  for (const auto& t : texts) body["input"].push_back(t);

  auto headers = auth_headers();
  auto res = post_with_retry(*transport_, *spec_.endpoint, body.dump(), headers, spec_.timeout,
                             retry_);

  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(res.body);
  } catch (const nlohmann::json::parse_error&) {
    throw Error(ErrorCode::Transport, "embedding reply is not JSON").with_status(res.status);
  }
  const auto data = reply.find("data");
  if (data == reply.end() || !data->is_array() || data->size() != texts.size()) {
    throw Error(ErrorCode::Transport, "embedding reply lacks one 'data' item per input")
        .with_status(res.status);
  }

  std::vector<Vector> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < data->size(); ++i) {
    const auto& item = (*data)[i];
    auto emb = item.find("embedding");
    if (emb == item.end() || !emb->is_array()) {
      throw Error(ErrorCode::Transport, "embedding reply item lacks 'embedding'")
          .at_index(offset + i);
    }
    if (emb->size() != spec_.dim) {
      throw Error(ErrorCode::DimMismatch, "expected " + std::to_string(spec_.dim) + ", got " +
                                              std::to_string(emb->size()))
          .at_index(offset + i);
    }
    std::vector<double> raw;
    raw.reserve(emb->size());
    for (const auto& x : *emb) {
      if (!x.is_number()) {
        throw Error(ErrorCode::Transport, "non-numeric embedding value").at_index(offset + i);
      }
      raw.push_back(x.get<double>());
    }
    try {
      out.push_back(to_unit(raw));
    } catch (const Error&) {
      throw Error(ErrorCode::Transport, "zero-norm embedding in reply").at_index(offset + i);
    }
  }
  return out;
}

// EmbeddingCache

EmbeddingCache::EmbeddingCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create cache dir " + dir_.string());
}

std::string EmbeddingCache::key(std::string_view provider_id, std::string_view model_id,
                                std::string_view normalized_text) {
  std::string material;
  material.reserve(provider_id.size() + model_id.size() + normalized_text.size() + 2);
  material.append(provider_id).push_back('\x1f');
  material.append(model_id).push_back('\x1f');
  material.append(normalized_text);
  return sha256_hex(material);
}

std::filesystem::path EmbeddingCache::file_for(const std::string& key) const {
  return dir_ / (key + ".lfv");
}

std::string EmbeddingCache::encode(const Vector& v) {
  std::string out;
  out.reserve(kCacheHeaderSize + 4 * v.size());
  out.append(kCacheMagic, 4);
  put_u32_le(out, static_cast<std::uint32_t>(v.size()));
  out.append(8, '\0');
  for (float x : v) put_u32_le(out, std::bit_cast<std::uint32_t>(x));
  return out;
}

Vector EmbeddingCache::decode(std::string_view bytes) {
  if (bytes.size() < kCacheHeaderSize || bytes.substr(0, 4) != std::string_view(kCacheMagic, 4)) {
    throw Error(ErrorCode::BadMagic, "not an LFV1 cache entry");
  }
  const std::uint32_t dim = get_u32_le(bytes, 4);
  if (bytes.size() != kCacheHeaderSize + 4ULL * dim) {
    throw Error(ErrorCode::BadMagic, "cache entry length disagrees with its header");
  }
  Vector v(dim);
  for (std::uint32_t i = 0; i < dim; ++i) {
    v[i] = std::bit_cast<float>(get_u32_le(bytes, kCacheHeaderSize + 4ULL * i));
  }
  return v;
}

std::optional<Vector> EmbeddingCache::get(const std::string& key) const {
  std::shared_lock lock(mutex_);
  auto path = file_for(key);
  if (!std::filesystem::exists(path)) return std::nullopt;
  return decode(read_file(path));
}

void EmbeddingCache::put(const std::string& key, const Vector& v) {
  std::unique_lock lock(mutex_);
  auto path = file_for(key);
  if (std::filesystem::exists(path)) return;
  write_file_atomic(path, encode(v));
}

// CachedEmbedder

CachedEmbedder::CachedEmbedder(std::unique_ptr<Embedder> inner,
                               std::shared_ptr<EmbeddingCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

std::vector<Vector> CachedEmbedder::embed_normalized(std::span<const std::string> texts) {
  const auto& s = inner_->spec();
  std::vector<Vector> out(texts.size());
  std::vector<std::string> keys(texts.size());
  std::vector<std::size_t> miss_index;
  std::vector<std::string> miss_text;

  for (std::size_t i = 0; i < texts.size(); ++i) {
    keys[i] = EmbeddingCache::key(s.provider_id, s.model_id, texts[i]);
    if (auto hit = cache_->get(keys[i]); hit && hit->size() == s.dim) {
      out[i] = std::move(*hit);
      ++hits_;
    } else {
      miss_index.push_back(i);
      miss_text.push_back(texts[i]);
    }
  }
  if (miss_text.empty()) return out;
  misses_ += miss_text.size();

  std::vector<Vector> fresh;
  try {
    fresh = inner_->embed_batch(miss_text);
  } catch (Error& e) {
    if (e.index && *e.index < miss_index.size()) {
      throw std::move(e).at_index(miss_index[*e.index]);
    }
    throw;
  }
  // Only write once the whole batch succeeded.
  for (std::size_t j = 0; j < fresh.size(); ++j) {
    cache_->put(keys[miss_index[j]], fresh[j]);
    out[miss_index[j]] = std::move(fresh[j]);
  }
  return out;
}

std::unique_ptr<Embedder> make_embedder(const ProviderSpec& spec,
                                        const std::optional<std::filesystem::path>& cache_dir,
                                        std::shared_ptr<HttpTransport> transport,
                                        RetryPolicy retry) {
  spec.validate();
  std::unique_ptr<Embedder> base;
  if (spec.is_remote()) {
    base = std::make_unique<RemoteEmbedder>(spec, std::move(transport), std::move(retry));
  } else {
    base = std::make_unique<LocalEmbedder>(spec);
  }
  if (!cache_dir) return base;
  return std::make_unique<CachedEmbedder>(std::move(base),
                                          std::make_shared<EmbeddingCache>(*cache_dir));
}

}  // namespace conlink
