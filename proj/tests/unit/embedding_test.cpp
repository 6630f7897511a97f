// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <deque>
#include <set>

#include "conlink/embedding.hpp"
#include "conlink/error.hpp"
#include "conlink/memory.hpp"
#include "conlink/text.hpp"
#include "json.hpp"
#include "oracle.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

namespace conlink {
namespace {

using testing::oracle_trigram_embed;

class ScriptedTransport : public HttpTransport {
 public:
  std::deque<HttpResponse> replies;
  std::vector<std::string> bodies;
  std::vector<Headers> headers;

  HttpResponse post_json(const std::string&, const std::string& body, const Headers& h,
                         std::chrono::milliseconds) override {
    bodies.push_back(body);
    headers.push_back(h);
    if (replies.empty()) return {0, "", "no scripted reply", false};
    auto r = replies.front();
    replies.pop_front();
    return r;
  }
};

/// Replies with a fixed-dim vector per input whose first component encodes
/// the input length, so callers can tell inputs apart.
class EchoTransport : public HttpTransport {
 public:
  explicit EchoTransport(std::size_t dim) : dim_(dim) {}
  std::size_t calls = 0;
  HttpResponse post_json(const std::string&, const std::string& body, const Headers&,
                         std::chrono::milliseconds) override {
    ++calls;
    auto req = nlohmann::json::parse(body);
    nlohmann::json reply;
    reply["data"] = nlohmann::json::array();
    for (const auto& in : req["input"]) {
      std::vector<double> v(dim_, 0.0);
      v[0] = double(in.get<std::string>().size());
      v[1] = 1.0;
      reply["data"].push_back({{"embedding", v}});
    }
    return {200, reply.dump(), "", false};
  }

 private:
  std::size_t dim_;
};

RetryPolicy no_sleep(std::vector<std::chrono::milliseconds>* slept = nullptr) {
  RetryPolicy p;
  p.sleep = [slept](std::chrono::milliseconds d) {
    if (slept) slept->push_back(d);
  };
  return p;
}

ProviderSpec remote_spec(std::size_t dim = 4) {
  ProviderSpec s;
  s.provider_id = std::string(kRemoteProvider);
  s.model_id = "test-embed";
  s.dim = dim;
  s.endpoint = "http://embeddings.invalid/v1/embeddings";
  return s;
}

TEST(LocalEmbed, MatchesIndependentOracle) {
  for (std::uint64_t seed : {0ULL, 1ULL, 0xdeadbeefULL}) {
    for (std::size_t dim : {16u, 64u, 256u, 1000u}) {
      for (const auto& text : testing::random_query_texts(seed + dim, 40)) {
        EXPECT_EQ(local_embed(text, dim, seed), oracle_trigram_embed(text, dim, seed)) << text;
      }
    }
  }
}

TEST(LocalEmbed, FrozenBucketsForAspirin) {
  // " aspirin " has 7 distinct trigrams; with dim 256 and seed 0 they land in
  // these buckets (computed once with the oracle and frozen).
  const auto v = local_embed("Aspirin", 256, 0);
  std::set<std::size_t> buckets;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0f) buckets.insert(i);
  }
  const auto o = oracle_trigram_embed("aspirin", 256, 0);
  std::set<std::size_t> expected;
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (o[i] != 0.0f) expected.insert(i);
  }
  EXPECT_EQ(buckets, expected);
  EXPECT_EQ(buckets, (std::set<std::size_t>{13, 46, 113, 122, 167, 192, 203}));
}

TEST(LocalEmbed, DeterministicUnitNormAndTrimInvariant) {
  const auto a = local_embed("aspirin", 256);
  EXPECT_EQ(a, local_embed("aspirin", 256));
  EXPECT_NEAR(l2_norm(a), 1.0, 1e-6);
  EXPECT_NEAR(cosine(a, local_embed("aspirin ", 256)), 1.0, 1e-12);
  EXPECT_NEAR(cosine(a, a), 1.0, 1e-9);
}

TEST(LocalEmbed, SimilarityOrdering) {
  const auto t1 = local_embed("type 1 diabetes", 256);
  const auto t2 = local_embed("type 2 diabetes", 256);
  const auto asp = local_embed("aspirin", 256);
  EXPECT_GT(cosine(t1, t2), cosine(t1, asp));
  EXPECT_DOUBLE_EQ(cosine(t1, asp), cosine(asp, t1));
}

TEST(LocalEmbed, DisjointBucketsGiveZeroCosine) {
  // Search deterministically for a pair whose buckets the oracle says are disjoint.
  const auto texts = testing::random_query_texts(99, 200);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    for (std::size_t j = i + 1; j < texts.size(); ++j) {
      const auto a = oracle_trigram_embed(texts[i], 64, 0);
      const auto b = oracle_trigram_embed(texts[j], 64, 0);
      bool disjoint = true;
      for (std::size_t d = 0; d < 64 && disjoint; ++d) disjoint = !(a[d] != 0 && b[d] != 0);
      if (disjoint) {
        EXPECT_EQ(cosine(local_embed(texts[i], 64), local_embed(texts[j], 64)), 0.0);
        return;
      }
    }
  }
  FAIL() << "no disjoint pair found";
}

TEST(LocalEmbed, WordOrderMatters) {
  EXPECT_NE(local_embed("ab cd", 256), local_embed("cd ab", 256));
}

TEST(LocalEmbed, RejectsTinyDimAndEmptyText) {
  EXPECT_THROW(local_embed("x", 8), Error);
  try {
    local_embed(" \t", 64);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyText);
  }
}

TEST(Embedder, BatchEqualsSingleCalls) {
  LocalEmbedder e(ProviderSpec{});
  const auto texts = testing::random_query_texts(5, 100);
  const auto batch = e.embed_batch(texts);
  ASSERT_EQ(batch.size(), texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) EXPECT_EQ(batch[i], e.embed_text(texts[i]));
}

TEST(Embedder, EmptyTextReportsIndex) {
  LocalEmbedder e(ProviderSpec{});
  std::vector<std::string> texts{"a", "", "c"};
  try {
    e.embed_batch(texts);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::EmptyText);
    EXPECT_EQ(err.index, 1u);
  }
}

TEST(ProviderSpec, Validation) {
  ProviderSpec s;
  EXPECT_NO_THROW(s.validate());
  s.dim = 0;
  EXPECT_THROW(s.validate(), Error);
  auto r = remote_spec();
  EXPECT_NO_THROW(r.validate());
  r.endpoint.reset();
  EXPECT_THROW(r.validate(), Error);
  ProviderSpec local_with_endpoint;
  local_with_endpoint.endpoint = "http://x";
  EXPECT_THROW(local_with_endpoint.validate(), Error);
}

TEST(EmbeddingCache, EncodingLayout) {
  const Vector v{1.0f, -0.5f};
  const auto bytes = EmbeddingCache::encode(v);
  ASSERT_EQ(bytes.size(), 16u + 8u);
  EXPECT_EQ(bytes.substr(0, 4), "LFV1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 2);
  EXPECT_EQ(bytes.substr(8, 8), std::string(8, '\0'));
  // 1.0f = 0x3f800000 little-endian
  EXPECT_EQ(bytes.substr(16, 4), std::string("\x00\x00\x80\x3f", 4));
  EXPECT_EQ(EmbeddingCache::decode(bytes), v);
  EXPECT_THROW(EmbeddingCache::decode("LFV2" + bytes.substr(4)), Error);
  EXPECT_THROW(EmbeddingCache::decode(bytes.substr(0, 20)), Error);
}

TEST(EmbeddingCache, KeySeparatesFields) {
  EXPECT_NE(EmbeddingCache::key("ab", "c", "x"), EmbeddingCache::key("a", "bc", "x"));
  EXPECT_EQ(EmbeddingCache::key("p", "m", "t"), sha256_hex("p\x1fm\x1ft"));
}

TEST(CachedEmbedder, SecondRunIsServedFromDisk) {
  testing::TempDir dir;
  auto transport = std::make_shared<EchoTransport>(4);
  const std::vector<std::string> texts{"alpha", "beta  gamma", "delta"};
  {
    CachedEmbedder e(std::make_unique<RemoteEmbedder>(remote_spec(), transport, no_sleep()),
                     std::make_shared<EmbeddingCache>(dir.path()));
    e.embed_batch(texts);
    EXPECT_EQ(e.misses(), 3u);
  }
  const auto calls_after_first = transport->calls;
  CachedEmbedder again(std::make_unique<RemoteEmbedder>(remote_spec(), transport, no_sleep()),
                       std::make_shared<EmbeddingCache>(dir.path()));
  const auto vs = again.embed_batch(texts);
  EXPECT_EQ(again.hits(), 3u);
  EXPECT_EQ(transport->calls, calls_after_first);
  EXPECT_EQ(vs[1], again.embed_text("beta gamma"));  // normalized text shares the key
}

TEST(CachedEmbedder, FailedBatchWritesNothing) {
  testing::TempDir dir;
  auto transport = std::make_shared<ScriptedTransport>();
  transport->replies.push_back({200, R"({"data":[{"embedding":[1,0,0,0]},{"embedding":[1,0]}]})", "", false});
  CachedEmbedder e(std::make_unique<RemoteEmbedder>(remote_spec(), transport, no_sleep()),
                   std::make_shared<EmbeddingCache>(dir.path()));
  const std::vector<std::string> texts{"one", "two"};
  try {
    e.embed_batch(texts);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::DimMismatch);
    EXPECT_EQ(err.index, 1u);
  }
  EXPECT_TRUE(std::filesystem::is_empty(dir.path()));
}

TEST(RemoteEmbedder, RequestShapeAndUnitNormalisation) {
  ::setenv(kApiKeyEnv, "sk-test", 1);
  auto transport = std::make_shared<ScriptedTransport>();
  transport->replies.push_back({200, R"({"data":[{"embedding":[3,4,0,0]}]})", "", false});
  RemoteEmbedder e(remote_spec(), transport, no_sleep());
  const auto v = e.embed_text("  Aspirin ");
  EXPECT_FLOAT_EQ(v[0], 0.6f);
  EXPECT_FLOAT_EQ(v[1], 0.8f);
  const auto body = nlohmann::json::parse(transport->bodies.at(0));
  EXPECT_EQ(body["model"], "test-embed");
  EXPECT_EQ(body["input"], nlohmann::json::array({"Aspirin"}));
  ASSERT_EQ(transport->headers.at(0).size(), 1u);
  EXPECT_EQ(transport->headers[0][0].second, "Bearer sk-test");
  ::unsetenv(kApiKeyEnv);
}

TEST(RemoteEmbedder, RetriesServerErrorsThenSucceeds) {
  auto transport = std::make_shared<ScriptedTransport>();
  transport->replies.push_back({503, "", "", false});
  transport->replies.push_back({0, "", "connection reset", false});
  transport->replies.push_back({200, R"({"data":[{"embedding":[0,1,0,0]}]})", "", false});
  std::vector<std::chrono::milliseconds> slept;
  RemoteEmbedder e(remote_spec(), transport, no_sleep(&slept));
  EXPECT_NO_THROW(e.embed_text("x"));
  EXPECT_EQ(slept, (std::vector<std::chrono::milliseconds>{std::chrono::seconds(1),
                                                           std::chrono::seconds(2)}));
}

TEST(RemoteEmbedder, ExhaustedRetriesSurfaceTransport) {
  auto transport = std::make_shared<ScriptedTransport>();
  for (int i = 0; i < 3; ++i) transport->replies.push_back({500, "", "", false});
  RemoteEmbedder e(remote_spec(), transport, no_sleep());
  try {
    e.embed_text("x");
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::Transport);
    EXPECT_EQ(err.status, 500);
  }
  EXPECT_EQ(transport->bodies.size(), 3u);
}

TEST(RemoteEmbedder, ClientErrorFailsFast) {
  auto transport = std::make_shared<ScriptedTransport>();
  transport->replies.push_back({401, "", "", false});
  RemoteEmbedder e(remote_spec(), transport, no_sleep());
  EXPECT_THROW(e.embed_text("x"), Error);
  EXPECT_EQ(transport->bodies.size(), 1u);
}

TEST(RemoteEmbedder, TimeoutsSurfaceAsTimeout) {
  auto transport = std::make_shared<ScriptedTransport>();
  for (int i = 0; i < 3; ++i) transport->replies.push_back({0, "", "timeout", true});
  RemoteEmbedder e(remote_spec(), transport, no_sleep());
  try {
    e.embed_text("x");
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::Timeout);
  }
}

TEST(RemoteEmbedder, SplitsLargeBatches) {
  auto transport = std::make_shared<EchoTransport>(4);
  RemoteEmbedder e(remote_spec(), transport, no_sleep(), 2);
  const std::vector<std::string> texts{"a", "bb", "ccc", "dddd", "eeeee"};
  const auto vs = e.embed_batch(texts);
  EXPECT_EQ(transport->calls, 3u);
  ASSERT_EQ(vs.size(), 5u);
  EXPECT_GT(vs[4][0], vs[0][0]);
}

}  // namespace
}  // namespace conlink
