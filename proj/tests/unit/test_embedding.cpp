#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

#include <json.hpp>

#include "common/error.hpp"
#include "corpus/manifest.hpp"
#include "embedding/backend.hpp"
#include "embedding/bpe_tokenizer.hpp"
#include "embedding/extract.hpp"
#include "embedding/image_preprocess.hpp"
#include "embedding/profile.hpp"
#include "embedding/store.hpp"
#include "test_util.hpp"

using namespace diffdetect;
using namespace diffdetect::embedding;
using testutil::fixture;

namespace {

BackboneProfile small_profile(int r) {
  auto p = builtin_profile("clip-vit");
  p.input_resolution = r;
  return p;
}

RgbImage random_image(std::mt19937& g, int w, int h) {
  RgbImage im{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)};
  for (auto& v : im.pixels) v = static_cast<std::uint8_t>(g() & 0xff);
  return im;
}

float normalised(std::uint8_t v, int c) {
  return (static_cast<float>(v) / 255.0f - kClipMean[c]) / kClipStd[c];
}

const BpeTokenizer& tokenizer() {
  static const BpeTokenizer tok = [] {
    const auto p = builtin_profile("clip-vit");
    return BpeTokenizer::load(p.vocab_path, p.merges_path);
  }();
  return tok;
}

ErrorCode code_of(const std::function<void()>& f, std::string* msg = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (msg) *msg = e.what();
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

double norm(const std::vector<float>& v) {
  double s = 0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

corpus::SampleRecord record(const std::string& id, bool generated,
                            corpus::Generator g = corpus::Generator::stable_diffusion()) {
  corpus::SampleRecord r;
  r.id = id;
  r.image_path = id + ".png";
  r.caption = "a caption";
  if (generated) {
    r.label = corpus::Label::kGenerated;
    r.generator = g;
  }
  return r;
}

}  // namespace

// ---- preprocessing ----

TEST(Preprocess, UniformGrayMatchesArithmetic) {
  const auto im = decode_image(fixture("corpus/images/gray_60x50.png"));
  ASSERT_EQ(im.width, 60);
  ASSERT_EQ(im.height, 50);
  const auto t = preprocess_image(im, builtin_profile("clip-vit"));
  ASSERT_EQ(t.resolution, 224);
  ASSERT_EQ(t.data.size(), 3u * 224 * 224);
  for (int c = 0; c < 3; ++c) {
    const double expect = (128.0 / 255.0 - kClipMean[c]) / kClipStd[c];
    for (int y = 0; y < 224; y += 17) {
      for (int x = 0; x < 224; x += 13) ASSERT_NEAR(t.at(c, y, x), expect, 1e-6);
    }
  }
  EXPECT_NEAR(t.at(0, 0, 0), 0.07635, 5e-5);
}

TEST(Preprocess, SquareAtResolutionIsIdentityCrop) {
  std::mt19937 g(5);
  const auto im = random_image(g, 16, 16);
  const auto t = preprocess_image(im, small_profile(16));
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) ASSERT_FLOAT_EQ(t.at(c, y, x), normalised(im.at(y, x, c), c));
}

TEST(Preprocess, WideImageTakesCentralWindow) {
  const auto im = decode_image(fixture("corpus/images/checker_448x224.png"));
  ASSERT_EQ(im.width, 448);
  ASSERT_EQ(im.height, 224);
  const auto t = preprocess_image(im, builtin_profile("clip-vit"));
  // generator formula from the fixture script, offset by the 112-pixel crop
  for (int y = 0; y < 224; ++y) {
    for (int x = 0; x < 224; ++x) {
      const int sx = x + 112;
      const int cell = ((sx / 8) + (y / 8)) % 2;
      const std::uint8_t rgb[3] = {static_cast<std::uint8_t>(cell * 200 + 20),
                                   static_cast<std::uint8_t>((1 - cell) * 180 + 40),
                                   static_cast<std::uint8_t>(sx % 256)};
      for (int c = 0; c < 3; ++c) ASSERT_FLOAT_EQ(t.at(c, y, x), normalised(rgb[c], c));
    }
  }
}

TEST(Preprocess, ShorterSideGoesToResolution) {
  std::mt19937 g(9);
  for (auto [w, h] : {std::pair{7, 3}, std::pair{3, 11}, std::pair{1, 1}, std::pair{100, 40}}) {
    const auto t = preprocess_image(random_image(g, w, h), small_profile(32));
    EXPECT_EQ(t.resolution, 32);
    EXPECT_EQ(t.data.size(), 3u * 32 * 32);
  }
}

TEST(Preprocess, OutputStaysInNormalisedRange) {
  std::mt19937 g(21);
  for (int trial = 0; trial < 40; ++trial) {
    const int w = 1 + static_cast<int>(g() % 90);
    const int h = 1 + static_cast<int>(g() % 90);
    const auto t = preprocess_image(random_image(g, w, h), small_profile(24));
    for (int c = 0; c < 3; ++c) {
      const float lo = (0.0f - kClipMean[c]) / kClipStd[c] - 1e-6f;
      const float hi = (1.0f - kClipMean[c]) / kClipStd[c] + 1e-6f;
      for (int i = 0; i < 24 * 24; ++i) {
        const float v = t.data[static_cast<std::size_t>(c) * 24 * 24 + i];
        ASSERT_GE(v, lo);
        ASSERT_LE(v, hi);
      }
    }
  }
}

TEST(Preprocess, BadInputs) {
  EXPECT_EQ(code_of([] { decode_image(fixture("corpus/images/nope.png")); }), ErrorCode::kIo);
  EXPECT_EQ(code_of([] { decode_image(fixture("corpus/images/truncated.png")); }),
            ErrorCode::kFormat);
  EXPECT_EQ(code_of([] { preprocess_image(RgbImage{}, small_profile(8)); }),
            ErrorCode::kInvalidArgument);
}

// ---- tokenizer ----

TEST(Tokenizer, MatchesReferenceIds) {
  const auto j = nlohmann::json::parse(testutil::slurp(fixture("tokenizer/reference_ids.json")));
  const int ctx = j.at("context_length").get<int>();
  ASSERT_GT(j.at("cases").size(), 10u);
  for (const auto& c : j.at("cases")) {
    const auto caption = c.at("caption").get<std::string>();
    const auto expect = c.at("ids").get<std::vector<std::int32_t>>();
    const auto seq = tokenizer().encode(caption, ctx);
    ASSERT_EQ(seq.ids.size(), static_cast<std::size_t>(ctx));
    EXPECT_EQ(std::vector<std::int32_t>(seq.ids.begin(), seq.ids.begin() + seq.effective_length),
              expect)
        << "caption: " << caption;
  }
}

TEST(Tokenizer, PhotoOfACat) {
  const auto seq = tokenizer().encode("a photo of a cat", 77);
  EXPECT_EQ(std::vector<std::int32_t>(seq.ids.begin(), seq.ids.begin() + 7),
            (std::vector<std::int32_t>{49406, 320, 1125, 539, 320, 2368, 49407}));
  EXPECT_EQ(seq.effective_length, 7);
}

TEST(Tokenizer, EmptyCaption) {
  const auto seq = tokenizer().encode("", 77);
  EXPECT_EQ(seq.effective_length, 2);
  EXPECT_EQ(seq.ids[0], tokenizer().start_id());
  EXPECT_EQ(seq.ids[1], tokenizer().end_id());
  for (int i = 2; i < 77; ++i) EXPECT_EQ(seq.ids[i], 0);
}

TEST(Tokenizer, LongCaptionTruncates) {
  std::string text;
  for (int i = 0; i < 500; ++i) text += "word" + std::to_string(i % 10) + " ";
  const auto seq = tokenizer().encode(text, 77);
  EXPECT_EQ(seq.effective_length, 77);
  EXPECT_EQ(seq.ids[76], tokenizer().end_id());
  EXPECT_EQ(seq.ids[0], tokenizer().start_id());
}

TEST(Tokenizer, MissingDataFiles) {
  std::string msg;
  EXPECT_EQ(code_of([] { BpeTokenizer::load("/nonexistent/vocab.json", "/nonexistent/merges.txt"); },
                    &msg),
            ErrorCode::kIo);
}

TEST(Tokenizer, CleanLowercasesAndCollapses) {
  EXPECT_EQ(BpeTokenizer::clean("  A\tBig \n\n CAT  "), "a big cat");
}

TEST(TokenizerProperty, FuzzInvariants) {
  std::mt19937 g(77);
  static const char* extra[] = {"é", "ß", "日本語", "🙂", "Ω", "\xcc\x81", "'s", "’", "\t", "12"};
  const auto& tok = tokenizer();
  for (int trial = 0; trial < 1000; ++trial) {
    std::string s;
    const int n = static_cast<int>(g() % 40);
    for (int k = 0; k < n; ++k) {
      if (g() % 4 == 0) {
        s += extra[g() % 10];
      } else {
        s += static_cast<char>(32 + g() % 95);
      }
    }
    const int ctx = trial % 3 == 0 ? 8 : 77;
    const auto seq = tok.encode(s, ctx);
    ASSERT_EQ(seq.ids.size(), static_cast<std::size_t>(ctx));
    ASSERT_GE(seq.effective_length, 2);
    ASSERT_LE(seq.effective_length, ctx);
    ASSERT_EQ(seq.ids[0], tok.start_id());
    ASSERT_EQ(seq.ids[seq.effective_length - 1], tok.end_id());
    for (int i = 1; i < seq.effective_length - 1; ++i) {
      ASSERT_GE(seq.ids[i], 0);
      ASSERT_LT(seq.ids[i], tok.start_id());
    }
    for (int i = seq.effective_length; i < ctx; ++i) ASSERT_EQ(seq.ids[i], 0);
  }
}

// ---- fuse / stub ----

TEST(Fuse, Examples) {
  const std::vector<float> a{1, 2}, b{3};
  EXPECT_EQ(fuse(a, b), (std::vector<float>{1, 2, 3}));
  EXPECT_EQ(fuse(a, {}), a);
  EXPECT_EQ(fuse(std::vector<float>(512, 1.f), std::vector<float>(512, 2.f)).size(), 1024u);
}

TEST(FuseProperty, LengthAndLayout) {
  std::mt19937 g(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> a(1 + g() % 64), b(1 + g() % 64);
    for (auto& v : a) v = static_cast<float>(g() % 1000);
    for (auto& v : b) v = -static_cast<float>(g() % 1000);
    const auto f = fuse(a, b);
    ASSERT_EQ(f.size(), a.size() + b.size());
    ASSERT_TRUE(std::equal(a.begin(), a.end(), f.begin()));
    ASSERT_TRUE(std::equal(b.begin(), b.end(), f.begin() + static_cast<long>(a.size())));
  }
}

TEST(Stub, DeterministicUnitNorm) {
  const auto r = record("sample-1", false);
  const auto a = embed_stub(r, Modality::kImage, 4, 512);
  const auto b = embed_stub(r, Modality::kImage, 4, 512);
  EXPECT_EQ(a, b);
  EXPECT_NEAR(norm(a), 1.0, 1e-6);
  EXPECT_NE(a, embed_stub(r, Modality::kText, 4, 512));
  EXPECT_NE(a, embed_stub(r, Modality::kImage, 5, 512));
}

TEST(Stub, PinnedAcrossProcesses) {
  // values recorded from an earlier run; any drift breaks stored feature files
  const auto v = embed_stub(record("pinned", false), Modality::kImage, 0, 8);
  const std::vector<float> expect = {-0.394562483f, -0.434645027f, 0.126371056f, -0.444185138f,
                                     -0.171408802f, 0.126606241f,  -0.216904461f, -0.591334403f};
  ASSERT_EQ(v.size(), expect.size());
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_FLOAT_EQ(v[i], expect[i]);
}

TEST(Stub, DistinctIdsNearlyOrthogonal) {
  int small = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = embed_stub(record("a" + std::to_string(i), false), Modality::kImage, 1, 512);
    const auto b = embed_stub(record("b" + std::to_string(i), false), Modality::kImage, 1, 512);
    const double cos = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
    if (std::abs(cos) < 0.2) ++small;
  }
  EXPECT_GE(small, 990);
}

TEST(Stub, PlantedBiasRaisesCoordinate) {
  const PlantedBias bias{std::nullopt, 0, 0.5f};
  const auto base = embed_stub(record("s9", false), Modality::kImage, 2, 64);
  const auto gen = embed_stub(record("s9", true), Modality::kImage, 2, 64, {&bias, 1});
  // unbiased vector is the same draw: label does not enter the key
  EXPECT_EQ(base, embed_stub(record("s9", true), Modality::kImage, 2, 64));
  std::vector<float> expect = base;
  expect[0] += 0.5f;
  EXPECT_GT(expect[0], base[0]);
  const double n = norm(expect);
  for (std::size_t i = 0; i < expect.size(); ++i) {
    EXPECT_NEAR(gen[i], expect[i] / n, 1e-6);
  }
  EXPECT_NEAR(norm(gen), 1.0, 1e-6);
}

TEST(Stub, BiasOnlyForMatchingGenerator) {
  const PlantedBias bias{corpus::Generator::glide(), 3, 0.5f};
  const auto sd = record("g1", true, corpus::Generator::stable_diffusion());
  const auto gl = record("g1", true, corpus::Generator::glide());
  EXPECT_EQ(embed_stub(sd, Modality::kImage, 0, 16, {&bias, 1}),
            embed_stub(sd, Modality::kImage, 0, 16));
  EXPECT_NE(embed_stub(gl, Modality::kImage, 0, 16, {&bias, 1}),
            embed_stub(gl, Modality::kImage, 0, 16));
  const auto real = record("g1", false);
  EXPECT_EQ(embed_stub(real, Modality::kImage, 0, 16, {&bias, 1}),
            embed_stub(real, Modality::kImage, 0, 16));
}

TEST(Stub, ContentModeSameImageSameVector) {
  StubBackend backend(builtin_profile("stub"), StubOptions{.keyed_on_id = false});
  const auto t = preprocess_image(decode_image(fixture("corpus/images/real_0.png")),
                                  builtin_profile("stub"));
  const auto a = backend.embed_image(t);
  EXPECT_EQ(a, backend.embed_image(t));
  EXPECT_NEAR(norm(a), 1.0, 1e-6);
  ImageTensor wrong{16, std::vector<float>(3 * 16 * 16, 0.f)};
  EXPECT_EQ(code_of([&] { backend.embed_image(wrong); }), ErrorCode::kDimensionMismatch);
}

// ---- ONNX backend ----

namespace {

BackboneProfile onnx_profile() {
  const auto j = nlohmann::json::parse(testutil::slurp(fixture("onnx/reference.json")));
  auto p = builtin_profile("clip-vit");
  p.name = "fixture";
  p.image_dim = j.at("image_dim").get<int>();
  p.text_dim = j.at("text_dim").get<int>();
  p.input_resolution = j.at("input_resolution").get<int>();
  p.context_length = j.at("context_length").get<int>();
  p.image_model_path = fixture("onnx/image_encoder.onnx");
  p.text_model_path = fixture("onnx/text_encoder.onnx");
  return p;
}

}  // namespace

TEST(Onnx, ImageMatchesReference) {
  const auto j = nlohmann::json::parse(testutil::slurp(fixture("onnx/reference.json")));
  const auto profile = onnx_profile();
  OnnxBackend backend(profile);
  const int r = profile.input_resolution;
  const std::size_t n = 3u * r * r;
  ImageTensor t{r, std::vector<float>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double x = -1.5 + 3.5 * static_cast<double>(i) / static_cast<double>(n - 1);
    t.data[i] = static_cast<float>(std::sin(7.0 * x));
  }
  const auto v = backend.embed_image(t);
  const auto expect = j.at("image_embeds").get<std::vector<float>>();
  ASSERT_EQ(v.size(), expect.size());
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(v[i], expect[i], 1e-4);
  EXPECT_EQ(v, backend.embed_image(t));

  ImageTensor wrong{r + 1, std::vector<float>(3u * (r + 1) * (r + 1))};
  EXPECT_EQ(code_of([&] { backend.embed_image(wrong); }), ErrorCode::kDimensionMismatch);
}

TEST(Onnx, TextMatchesReference) {
  const auto j = nlohmann::json::parse(testutil::slurp(fixture("onnx/reference.json")));
  OnnxBackend backend(onnx_profile());
  TokenSequence seq;
  seq.ids = j.at("input_ids").get<std::vector<std::int32_t>>();
  seq.effective_length = static_cast<int>(
      std::find(seq.ids.begin(), seq.ids.end(), 49407) - seq.ids.begin() + 1);
  const auto v = backend.embed_text(seq);
  const auto expect = j.at("text_embeds").get<std::vector<float>>();
  ASSERT_EQ(v.size(), expect.size());
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(v[i], expect[i], 1e-4);

  const auto empty = tokenizer().encode("", 77);
  for (float x : backend.embed_text(empty)) EXPECT_TRUE(std::isfinite(x));
}

TEST(Onnx, OutputWidthMustMatchProfile) {
  auto p = onnx_profile();
  p.image_dim = 17;
  OnnxBackend backend(p);
  ImageTensor t{p.input_resolution, std::vector<float>(3u * p.input_resolution * p.input_resolution)};
  EXPECT_EQ(code_of([&] { backend.embed_image(t); }), ErrorCode::kDimensionMismatch);
}

TEST(Onnx, MissingGraph) {
  auto p = onnx_profile();
  p.image_model_path = fixture("onnx/absent.onnx");
  EXPECT_EQ(code_of([&] { OnnxBackend b(p); }), ErrorCode::kIo);
}

// ---- store ----

TEST(Store, RoundTripAndHeader) {
  EmbeddingStore s;
  s.image_dim = 3;
  s.text_dim = 2;
  s.records.push_back({"a", {1, 2, 3}, std::vector<float>{4, 5}});
  s.records.push_back({"béta", {-1, 0, 1e-30f}, std::vector<float>{0, 7}});
  const auto bytes = serialize_store(s);
  EXPECT_EQ(bytes.substr(0, 4), "DEMB");
  std::uint16_t version = 0, flags = 0;
  std::uint32_t count = 0, di = 0, dt = 0;
  std::memcpy(&version, bytes.data() + 4, 2);
  std::memcpy(&flags, bytes.data() + 6, 2);
  std::memcpy(&count, bytes.data() + 8, 4);
  std::memcpy(&di, bytes.data() + 12, 4);
  std::memcpy(&dt, bytes.data() + 16, 4);
  EXPECT_EQ(version, 1);
  EXPECT_EQ(flags, 1);
  EXPECT_EQ(count, 2u);
  EXPECT_EQ(di, 3u);
  EXPECT_EQ(dt, 2u);
  EXPECT_EQ(bytes.size(), 20u + (2 + 1 + 20) + (2 + 5 + 20));
  EXPECT_EQ(deserialize_store(bytes), s);
}

TEST(Store, CorruptInputsRejected) {
  EmbeddingStore s;
  s.image_dim = 2;
  s.records.push_back({"a", {1, 2}, std::nullopt});
  const auto bytes = serialize_store(s);
  EXPECT_EQ(code_of([&] { deserialize_store(bytes.substr(0, bytes.size() - 1)); }),
            ErrorCode::kFormat);
  EXPECT_EQ(code_of([&] { deserialize_store(bytes + "x"); }), ErrorCode::kFormat);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(code_of([&] { deserialize_store(bad_magic); }), ErrorCode::kFormat);
  std::string bad_version = bytes;
  bad_version[4] = 2;
  EXPECT_EQ(code_of([&] { deserialize_store(bad_version); }), ErrorCode::kFormat);
}

// ---- extraction ----

namespace {

BackendFactory stub_factory(bool keyed = true) {
  return [keyed] {
    const auto p = builtin_profile("stub");
    auto tok = std::make_shared<const BpeTokenizer>(BpeTokenizer::load(p.vocab_path, p.merges_path));
    return std::make_unique<StubBackend>(p, StubOptions{.seed = 3, .keyed_on_id = keyed}, tok);
  };
}

}  // namespace

TEST(Extract, FourRecordsImageOnly) {
  testutil::TempDir tmp;
  const auto m = corpus::parse_manifest(fixture("corpus/four.jsonl"));
  extract_corpus_to_file(m, stub_factory(), {}, tmp / "f.demb");
  const auto bytes = testutil::slurp(tmp / "f.demb");
  std::uint32_t dt = 99;
  std::memcpy(&dt, bytes.data() + 16, 4);
  EXPECT_EQ(dt, 0u);
  const auto s = read_store(tmp / "f.demb");
  ASSERT_EQ(s.records.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(s.records[i].sample_id, m.records[i].id);
    EXPECT_FALSE(s.records[i].text_vec.has_value());
  }
}

TEST(Extract, FourRecordsImageText) {
  const auto m = corpus::parse_manifest(fixture("corpus/four.jsonl"));
  const auto s = extract_corpus(m, stub_factory(), {.mode = FeatureMode::kImageText});
  EXPECT_EQ(s.text_dim, 512u);
  for (const auto& r : s.records) {
    ASSERT_TRUE(r.text_vec.has_value());
    EXPECT_EQ(r.text_vec->size(), 512u);
  }
}

TEST(Extract, ContentModeReadsImagesAndIsDeterministic) {
  testutil::TempDir tmp;
  const auto m = corpus::parse_manifest(fixture("corpus/four.jsonl"));
  ExtractOptions o{.mode = FeatureMode::kImageText, .image_root = fixture("corpus"), .workers = 1};
  extract_corpus_to_file(m, stub_factory(false), o, tmp / "a.demb");
  o.workers = 4;
  extract_corpus_to_file(m, stub_factory(false), o, tmp / "b.demb");
  EXPECT_EQ(testutil::slurp(tmp / "a.demb"), testutil::slurp(tmp / "b.demb"));
  const auto s = read_store(tmp / "a.demb");
  // identical captions, different images
  EXPECT_EQ(s.records[0].text_vec, s.records[2].text_vec);
  EXPECT_NE(s.records[0].image_vec, s.records[2].image_vec);
}

TEST(Extract, CorruptImageAbortsWithoutOutput) {
  testutil::TempDir tmp;
  const auto m = corpus::parse_manifest(fixture("corpus/four_corrupt.jsonl"));
  ExtractOptions o{.mode = FeatureMode::kImageOnly, .image_root = fixture("corpus"), .workers = 2};
  std::string msg;
  EXPECT_EQ(code_of([&] { extract_corpus_to_file(m, stub_factory(false), o, tmp / "f.demb"); }, &msg),
            ErrorCode::kBackend);
  EXPECT_NE(msg.find("coco-sd0"), std::string::npos) << msg;
  EXPECT_EQ(msg.find("coco-r0"), std::string::npos) << msg;
  EXPECT_FALSE(std::filesystem::exists(tmp / "f.demb"));
  EXPECT_TRUE(std::filesystem::is_empty(tmp.path()));
}

TEST(Profile, Builtins) {
  EXPECT_EQ(builtin_profile("clip-vit").image_dim, 512);
  EXPECT_EQ(builtin_profile("clip-rn50").text_dim, 1024);
  EXPECT_EQ(builtin_profile("stub").context_length, 77);
  EXPECT_EQ(builtin_profile("clip-vit").input_resolution, 224);
  EXPECT_EQ(code_of([] { builtin_profile("vgg"); }), ErrorCode::kInvalidArgument);
}
