// SPDX-License-Identifier: Apache-2.0
#include "desksr/lm.hpp"

#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "desksr/error.hpp"

namespace desksr::lm {
namespace {

using ctc::Alphabet;
using ctc::LabelSequence;
using decode::Hypothesis;

Hypothesis hyp(LabelSequence t, double log_ac) {
  Hypothesis h;
  h.transcript = std::move(t);
  h.log_p_acoustic = log_ac;
  h.combined = log_ac;
  return h;
}

train::TrainConfig lm_config(int epochs, double lr = 0.1) {
  train::TrainConfig c;
  c.epochs = epochs;
  c.learning_rate = lr;
  c.seed = 5;
  return c;
}

TEST(LmScoreTest, ZeroModelIsUniform) {
  const auto alphabet = Alphabet::from_chars("ABCD");
  const auto lm = CharLm::zeros(alphabet, 3);
  const double step = std::log(1.0 / 5.0);
  for (std::size_t n : {0u, 1u, 4u, 9u}) {
    const LabelSequence seq(n, 2);
    EXPECT_NEAR(lm_score(lm, seq), static_cast<double>(n + 1) * step, 1e-12);
  }
}

TEST(LmScoreTest, EmptyIsEndGivenStart) {
  const auto lm = init_lm(Alphabet::from_chars("AB"), 4, 1);
  const auto lp = lm_log_probs(lm, std::vector<int>{});
  ASSERT_EQ(lp.rows(), 1);
  EXPECT_DOUBLE_EQ(lm_score(lm, std::vector<int>{}), lp(0, 0));
}

TEST(LmScoreTest, RowsAreDistributionsAndScoreNonPositive) {
  const auto lm = init_lm(Alphabet::english(), 8, 2);
  const auto seq = lm.alphabet.encode("HELLO THERE");
  const auto lp = lm_log_probs(lm, seq);
  ASSERT_EQ(lp.rows(), static_cast<Eigen::Index>(seq.size() + 1));
  ASSERT_EQ(lp.cols(), 28);
  for (Eigen::Index t = 0; t < lp.rows(); ++t) EXPECT_NEAR(lp.row(t).array().exp().sum(), 1.0, 1e-12);
  double sum = lp(static_cast<Eigen::Index>(seq.size()), 0);
  for (std::size_t i = 0; i < seq.size(); ++i) sum += lp(static_cast<Eigen::Index>(i), seq[i]);
  EXPECT_NEAR(lm_score(lm, seq), sum, 1e-12);
  EXPECT_LE(lm_score(lm, seq), 0.0);
}

TEST(LmScoreTest, OutOfVocabularyThrows) {
  const auto lm = init_lm(Alphabet::from_chars("AB"), 4, 1);
  EXPECT_THROW(lm_score(lm, std::vector<int>{1, 3}), DataError);
  EXPECT_THROW(lm_score(lm, std::vector<int>{0}), DataError);
}

TEST(LmTrainTest, OverfitsSingleString) {
  const auto alphabet = Alphabet::from_chars("AB");
  const std::vector<LabelSequence> corpus{alphabet.encode("AB")};
  const auto result = lm_train(corpus, alphabet, 16, lm_config(300));
  const double ab = lm_score(result.lm, alphabet.encode("AB"));
  EXPECT_GT(ab, -0.05);
  EXPECT_LT(lm_score(result.lm, alphabet.encode("BA")), ab);
}

TEST(LmTrainTest, LossDecreasesEarly) {
  const auto alphabet = Alphabet::from_chars("ABC ");
  const std::vector<LabelSequence> corpus{alphabet.encode("AB CAB")};
  const auto result = lm_train(corpus, alphabet, 8, lm_config(10, 0.01));
  ASSERT_EQ(result.epoch_loss.size(), 10u);
  for (std::size_t e = 1; e < 10; ++e) EXPECT_LT(result.epoch_loss[e], result.epoch_loss[e - 1]);
}

TEST(LmTrainTest, SameSeedSameParameters) {
  const auto alphabet = Alphabet::from_chars("AB ");
  const std::vector<LabelSequence> corpus{alphabet.encode("AB"), alphabet.encode("B A"), alphabet.encode("BA")};
  const auto a = lm_train(corpus, alphabet, 5, lm_config(4));
  const auto b = lm_train(corpus, alphabet, 5, lm_config(4));
  const auto x = nn::tensor_spans(a.lm);
  const auto y = nn::tensor_spans(b.lm);
  for (std::size_t k = 0; k < x.size(); ++k) {
    EXPECT_TRUE(std::equal(x[k].begin(), x[k].end(), y[k].begin(), y[k].end()));
  }
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
}

TEST(LmTrainTest, RepeatedCharacterDominatesStart) {
  const auto alphabet = Alphabet::from_chars("AB");
  const std::vector<LabelSequence> corpus(3, alphabet.encode("AAAA"));
  const auto result = lm_train(corpus, alphabet, 8, lm_config(100));
  const auto lp = lm_log_probs(result.lm, std::vector<int>{});
  EXPECT_GT(std::exp(lp(0, 1)), 0.95);
}

TEST(LmTrainTest, RejectsBadCorpus) {
  const auto alphabet = Alphabet::from_chars("AB");
  EXPECT_THROW(lm_train({}, alphabet, 4, lm_config(1)), DataError);
  const std::vector<LabelSequence> oov{{1, 5}};
  EXPECT_THROW(lm_train(oov, alphabet, 4, lm_config(1)), DataError);
  EXPECT_THROW(lm_train(std::vector<LabelSequence>{{1}}, alphabet, 4, lm_config(0)), InvalidArgument);
}

class RescoreTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    alphabet_ = Alphabet::english();
    const std::vector<LabelSequence> corpus{alphabet_.encode("WELCOME"), alphabet_.encode("WELCOME HOME"),
                                            alphabet_.encode("COME")};
    lm_ = lm_train(corpus, alphabet_, 16, lm_config(60)).lm;
  }
  static Alphabet alphabet_;
  static CharLm lm_;
};

Alphabet RescoreTest::alphabet_;
CharLm RescoreTest::lm_;

TEST_F(RescoreTest, LanguageModelFixesMisrecognition) {
  const auto good = alphabet_.encode("WELCOME");
  const auto bad = alphabet_.encode("WELCAAM");
  ASSERT_GT(lm_score(lm_, good) - lm_score(lm_, bad), 0.2);
  const auto out = rescore({hyp(bad, -4.8), hyp(good, -5.0)}, lm_, 1.0);
  EXPECT_EQ(out[0].transcript, good);
  EXPECT_DOUBLE_EQ(out[0].combined, -5.0 + lm_score(lm_, good));
  ASSERT_TRUE(out[0].log_p_lm.has_value());
  EXPECT_DOUBLE_EQ(*out[0].log_p_lm, lm_score(lm_, good));
}

TEST_F(RescoreTest, ZeroWeightKeepsAcousticRanking) {
  const std::vector<Hypothesis> in{hyp(alphabet_.encode("WELCAAM"), -1.0), hyp(alphabet_.encode("WELCOME"), -2.0),
                                   hyp(alphabet_.encode("ZZZ"), -3.0)};
  const auto out = rescore(in, lm_, 0.0);
  for (std::size_t i = 0; i < in.size(); ++i) {
    EXPECT_EQ(out[i].transcript, in[i].transcript);
    EXPECT_EQ(out[i].combined, in[i].log_p_acoustic);
  }
}

TEST_F(RescoreTest, EqualLmScoresKeepRanking) {
  // Same string at different acoustic scores: LM term is identical.
  const auto t = alphabet_.encode("COME");
  const std::vector<Hypothesis> in{hyp(t, -1.0), hyp(t, -1.5), hyp(t, -4.0)};
  for (double w : {0.5, 1.0, 30.0}) {
    const auto out = rescore(in, lm_, w);
    for (std::size_t i = 0; i < in.size(); ++i) EXPECT_EQ(out[i].log_p_acoustic, in[i].log_p_acoustic);
  }
}

TEST_F(RescoreTest, StableOnTiesAndTranscriptsUntouched) {
  const auto a = alphabet_.encode("HOME");
  std::vector<Hypothesis> in{hyp(a, -2.0), hyp(a, -2.0), hyp(alphabet_.encode("XQ"), -2.0)};
  in[0].log_p_lm = 123.0;  // overwritten
  in[1].combined = 7.0;    // recomputed
  const auto out = rescore(in, lm_, 1.0);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].log_p_acoustic, -2.0);
  EXPECT_EQ(out[0].transcript, a);
  EXPECT_EQ(out[1].transcript, a);
  EXPECT_EQ(out[0].combined, out[1].combined);
  std::multiset<LabelSequence> before, after;
  for (const auto& h : in) before.insert(h.transcript);
  for (const auto& h : out) after.insert(h.transcript);
  EXPECT_EQ(before, after);

  // Equal combined scores keep their input order, whatever the transcripts.
  const std::vector<Hypothesis> ties{hyp(alphabet_.encode("ZZ"), -1.0), hyp(alphabet_.encode("AA"), -1.0),
                                     hyp(alphabet_.encode("MM"), -1.0)};
  const auto kept = rescore(ties, lm_, 0.0);
  for (std::size_t i = 0; i < ties.size(); ++i) EXPECT_EQ(kept[i].transcript, ties[i].transcript);
}

TEST_F(RescoreTest, HugeWeightGivesLanguageModelRanking) {
  std::vector<Hypothesis> in;
  for (const char* s : {"WELCAAM", "HOME", "QQQ", "WELCOME", "COME"}) in.push_back(hyp(alphabet_.encode(s), -0.5));
  in[0].log_p_acoustic = in[0].combined = -0.01;
  const auto out = rescore(in, lm_, 1e6);
  for (std::size_t i = 1; i < out.size(); ++i) {
    EXPECT_GE(lm_score(lm_, out[i - 1].transcript), lm_score(lm_, out[i].transcript));
  }
}

TEST_F(RescoreTest, NegativeWeightAndOovRejected) {
  EXPECT_THROW(rescore({hyp({1}, -1.0)}, lm_, -0.5), InvalidArgument);
  EXPECT_THROW(rescore({hyp({99}, -1.0)}, lm_, 1.0), DataError);
}

}  // namespace
}  // namespace desksr::lm
