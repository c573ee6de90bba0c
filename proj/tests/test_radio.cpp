#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "dss/radio.hpp"

using namespace dss;

TEST(PathLoss, ReferenceDistances) {
  EXPECT_DOUBLE_EQ(path_loss_db(1.0), 20.4);
  EXPECT_NEAR(path_loss_db(100.0), 20.4 + 37.6 * 2.0, 1e-12);
  EXPECT_NEAR(path_loss_db(100.0), 95.6, 1e-12);
  EXPECT_NEAR(path_loss_db(1000.0), 133.2, 1e-12);
}

TEST(PathLoss, RejectsDistancesBelowOneMetre) {
  EXPECT_THROW(path_loss_db(0.5), std::domain_error);
  EXPECT_THROW(path_loss_db(0.0), std::domain_error);
  EXPECT_THROW(path_loss_db(std::nan("")), std::domain_error);
}

TEST(Snr, ZeroChannelGivesZero) {
  EXPECT_EQ(snr(0.8, 0.0, 95.6, dbm_to_watts(-112.5)), 0.0);
}

TEST(Snr, LinkBudgetAt100Metres) {
  // 10log10(0.8 W / 1 mW) = 29.03 dBm; 29.03 - 95.6 + 112.5 = 45.93 dB.
  const double expected_db = 10.0 * std::log10(800.0) - 95.6 + 112.5;
  const double g = snr(0.8, 1.0, 95.6, dbm_to_watts(-112.5));
  EXPECT_NEAR(10.0 * std::log10(g), expected_db, 1e-9);
  EXPECT_NEAR(10.0 * std::log10(g), 45.93, 0.01);
  EXPECT_NEAR(g, 3.91e4, 0.01e4);
}

TEST(Snr, LinearInPower) {
  const double n = dbm_to_watts(-112.5);
  EXPECT_NEAR(snr(1.6, 1.0, 95.6, n), 2.0 * snr(0.8, 1.0, 95.6, n), 1e-9);
}

TEST(Snr, RejectsNegativeInputs) {
  EXPECT_THROW(snr(-1.0, 1.0, 90.0, 1e-12), std::domain_error);
  EXPECT_THROW(snr(1.0, 1.0, 90.0, 0.0), std::domain_error);
}

TEST(AchievableRate, ZeroPrbs) { EXPECT_EQ(achievable_rate(0, 100.0, 180e3, 5.55), 0.0); }

TEST(AchievableRate, UnitSnrOnePrb) {
  EXPECT_DOUBLE_EQ(achievable_rate(1, 1.0, 180e3, 100.0), 180000.0);
}

TEST(AchievableRate, CapBinds) {
  const double g = snr(0.8, 1.0, 95.6, dbm_to_watts(-112.5));
  EXPECT_GT(std::log2(1.0 + g), 15.0);
  EXPECT_NEAR(achievable_rate(1, g, 180e3, 5.55), 999000.0, 1e-6);
  EXPECT_NEAR(achievable_rate(25, g, 180e3, 5.55), 25 * 999000.0, 1e-6);
}

TEST(DataSymbols, PerRatAndContext) {
  EXPECT_EQ(data_symbols(Rat::LTE, false), 12);
  EXPECT_EQ(data_symbols(Rat::LTE, true), 12);
  EXPECT_EQ(data_symbols(Rat::NR, false), 11);
  EXPECT_EQ(data_symbols(Rat::NR, true), 13);
}

TEST(RadioParams, Validation) {
  RadioParams r;
  EXPECT_NO_THROW(r.validate());
  r.total_prbs = 0;
  EXPECT_THROW(r.validate(), ConfigError);
}
