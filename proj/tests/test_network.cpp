#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "support.hpp"
#include "viblstm/errors.hpp"
#include "viblstm/serialize.hpp"

using namespace viblstm;
using testsupport::random_model;

namespace {

const char* tmp_path(const char* name) {
  static std::string buf;
  buf = std::string("vibl_test_") + name;
  return buf.c_str();
}

}  // namespace

TEST_CASE("fully masked input still yields head(h) logits") {
  const Dims dims{3, 4, 2, 5};
  SequenceClassifier m = random_model(dims, 101);
  m.feature_gate.mu = Tensor({3});  // zero feature mask
  SeededRng rng(1);
  const Tensor x = gaussian(rng, {5, 3});
  const Tensor logits = forward(m, x, RunMode::Evaluation);

  // Oracle: run the same model on an all-zero input sequence.
  SequenceClassifier open = m;
  open.feature_gate.mu = Tensor::full({3}, 1.0);
  const Tensor logits_zero_input = forward(open, Tensor({5, 3}), RunMode::Evaluation);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    CHECK(logits.at(i) == doctest::Approx(logits_zero_input.at(i)).epsilon(1e-12));
  }
}

TEST_CASE("unit masks reduce to a plain LSTM classifier") {
  const Dims dims{3, 4, 2, 4};
  SequenceClassifier m = random_model(dims, 102);
  m.feature_gate.mu = Tensor::full({3}, 1.0);
  for (int k = 0; k < 4; ++k) m.gate_masks[static_cast<std::size_t>(k)].mu = Tensor::full({4}, 1.0);
  SeededRng rng(2);
  const Tensor x = gaussian(rng, {4, 3});

  const Tensor got = forward(m, x, RunMode::Evaluation);
  const UnrollTrace plain = unroll_with_masks(
      m.lstm, {Tensor::full({4}, 1.0), Tensor::full({4}, 1.0), Tensor::full({4}, 1.0),
               Tensor::full({4}, 1.0)},
      x);
  const Tensor expected = add(matvec(m.head_w, plain.final_hidden), m.head_b);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got.at(i) == expected.at(i));
}

TEST_CASE("training forward with zero dropout equals evaluation forward") {
  const Dims dims{4, 3, 2, 3};
  SequenceClassifier m = random_model(dims, 103);
  m.dropout_p = 0.0;
  // Shrink every mask deviation so the stochastic draw collapses onto the mean.
  const double tiny = softplus_inverse(1e-14);
  m.feature_gate.rho = Tensor::full({4}, tiny);
  for (int k = 0; k < 4; ++k) m.gate_masks[static_cast<std::size_t>(k)].rho = Tensor::full({3}, tiny);

  SeededRng data_rng(3), mode_rng(4);
  const Tensor x = gaussian(data_rng, {3, 4});
  const Tensor train_logits = forward(m, x, RunMode::Training, &mode_rng);
  const Tensor eval_logits = forward(m, x, RunMode::Evaluation);
  for (std::size_t i = 0; i < train_logits.size(); ++i) {
    CHECK(train_logits.at(i) == doctest::Approx(eval_logits.at(i)).epsilon(1e-10));
  }
}

TEST_CASE("forward is deterministic in evaluation mode") {
  const Dims dims{5, 6, 3, 4};
  const SequenceClassifier m = random_model(dims, 104);
  SeededRng rng(5);
  const Tensor x = gaussian(rng, {4, 5});
  const Tensor a = forward(m, x, RunMode::Evaluation);
  const Tensor b = forward(m, x, RunMode::Evaluation);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.at(i) == b.at(i));
}

TEST_CASE("forward rejects shape mismatches") {
  const Dims dims{5, 6, 3, 4};
  const SequenceClassifier m = random_model(dims, 105);
  CHECK_THROWS_AS(forward(m, Tensor({4, 6}), RunMode::Evaluation), DimensionError);
  CHECK_THROWS_AS(forward(m, Tensor({3, 5}), RunMode::Evaluation), DimensionError);
}

TEST_CASE("parameter counts") {
  SUBCASE("published dense configuration") {
    CHECK(lstm_parameter_count(2048, 2048) == 33562624ULL);
  }
  SUBCASE("smallest case") { CHECK(lstm_parameter_count(1, 1) == 12ULL); }
  SUBCASE("pruned configuration") { CHECK(lstm_parameter_count(49, 9) == 2124ULL); }
  SUBCASE("model totals are consistent") {
    const Dims dims{6, 5, 3, 2};
    const SequenceClassifier m = random_model(dims, 106);
    const ParameterCounts counts = count_parameters(m);
    CHECK(counts.lstm_count == 4 * (5 * 6 + 25 + 5));
    CHECK(counts.head_count == 3 * 5 + 3);
    CHECK(counts.vib_count == 2 * (6 + 4 * 5));
    CHECK(counts.total == counts.lstm_count + counts.head_count + counts.vib_count);
  }
}

TEST_CASE("compression ratio") {
  CHECK(compression_ratio(59.246e6, 0.1778e6) == doctest::Approx(333.2).epsilon(1e-3));
  CHECK(compression_ratio(10, 10) == 1.0);
  CHECK(compression_ratio(33562624.0, 2124.0) == doctest::Approx(15801.6).epsilon(1e-4));
  CHECK_THROWS_AS(compression_ratio(10, 0), std::invalid_argument);
}

TEST_CASE("model container round trip") {
  const Dims dims{4, 3, 2, 5};
  SequenceClassifier m = random_model(dims, 107);
  m.meta = TrainingMeta{1.0, 2.0, 0.1, 42, 17};
  const std::string path = tmp_path("roundtrip.vibl");
  save_model(m, path);
  const SequenceClassifier loaded = load_model(path);

  SUBCASE("tensors are bit-identical at 32-bit precision") {
    for (int k = 0; k < 4; ++k) {
      for (std::size_t i = 0; i < m.lstm.w(k).size(); ++i) {
        CHECK(static_cast<float>(m.lstm.w(k).at(i)) ==
              static_cast<float>(loaded.lstm.w(k).at(i)));
      }
    }
    for (std::size_t i = 0; i < m.feature_gate.mu.size(); ++i) {
      CHECK(static_cast<float>(m.feature_gate.mu.at(i)) ==
            static_cast<float>(loaded.feature_gate.mu.at(i)));
    }
    CHECK(loaded.meta.has_value());
    CHECK(loaded.meta->seed == 42);
  }

  SUBCASE("save of a loaded model reproduces the file bytes") {
    const std::string path2 = tmp_path("roundtrip2.vibl");
    save_model(loaded, path2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    std::remove(path2.c_str());
  }

  SUBCASE("forward outputs survive the round trip to 32-bit rounding") {
    SeededRng rng(6);
    const Tensor x = gaussian(rng, {5, 4});
    const Tensor before = forward(m, x, RunMode::Evaluation);
    const Tensor after = forward(loaded, x, RunMode::Evaluation);
    for (std::size_t i = 0; i < before.size(); ++i) {
      CHECK(after.at(i) ==
            doctest::Approx(before.at(i)).epsilon(1e-5));
    }
  }

  std::remove(path.c_str());
}

TEST_CASE("manifest payload accounting") {
  const Dims dims{3, 2, 2, 4};
  const SequenceClassifier m = random_model(dims, 108);
  const std::string path = tmp_path("manifest.vibl");
  save_model(m, path);

  std::ifstream f(path, std::ios::binary);
  const std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  std::uint64_t manifest_len = 0;
  for (int i = 0; i < 8; ++i) {
    manifest_len |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[8 + i])) << (8 * i);
  }
  const auto manifest = nlohmann::json::parse(buf.substr(16, manifest_len));
  std::size_t declared = 0;
  for (const auto& entry : manifest.at("tensors")) {
    std::size_t count = 1;
    for (std::size_t s : entry.at("shape").get<std::vector<std::size_t>>()) count *= s;
    declared += 4 * count;
  }
  CHECK(declared == buf.size() - 16 - manifest_len);
  std::remove(path.c_str());
}

TEST_CASE("corrupt containers are rejected") {
  const Dims dims{3, 2, 2, 4};
  const SequenceClassifier m = random_model(dims, 109);
  const std::string path = tmp_path("corrupt.vibl");
  save_model(m, path);

  std::ifstream f(path, std::ios::binary);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  f.close();

  SUBCASE("bad magic") {
    buf[0] = 'X';
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    out.close();
    try {
      load_model(path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 0);
    }
  }
  SUBCASE("truncated payload") {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size() - 5));
    out.close();
    CHECK_THROWS_AS(load_model(path), FormatError);
  }
  SUBCASE("bad version") {
    buf[4] = 9;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    out.close();
    CHECK_THROWS_AS(load_model(path), FormatError);
  }
  std::remove(path.c_str());
}
