#include <gtest/gtest.h>

#include <sstream>

#include "dvrft/artifacts.hpp"

using namespace dvrft;

TEST(SignalCsv, RoundTripIsExact) {
  const SignalRecord s({0.1, -2.5, 1.0 / 3.0, 1e-17}, 0.01);
  std::stringstream ss;
  io::write_signal_csv(ss, s);
  const auto back = io::read_signal_csv(ss);
  EXPECT_EQ(back.samples(), s.samples());
  EXPECT_NEAR(back.ts(), 0.01, 1e-15);
}

TEST(SignalCsv, SkipsCommentLines) {
  std::stringstream ss("# provenance\nt,value\n0,1\n0.5,2\n# trailing note\n1.0,3\n");
  const auto s = io::read_signal_csv(ss);
  EXPECT_EQ(s.size(), 3u);
  EXPECT_DOUBLE_EQ(s.ts(), 0.5);
}

TEST(SignalCsv, RejectsMalformedInput) {
  std::stringstream bad_header("time,v\n0,1\n1,2\n");
  EXPECT_THROW(io::read_signal_csv(bad_header), PreconditionError);
  std::stringstream uneven("t,value\n0,1\n1,2\n2.5,3\n");
  EXPECT_THROW(io::read_signal_csv(uneven), PreconditionError);
  std::stringstream single("t,value\n0,1\n");
  EXPECT_THROW(io::read_signal_csv(single), PreconditionError);
  std::stringstream garbage("t,value\n0,1\n1,x\n");
  EXPECT_THROW(io::read_signal_csv(garbage), PreconditionError);
}

TEST(ModelJson, TransferFunctionRoundTrip) {
  const auto tf = TransferFunction::discrete({0.5, 0.1}, {1.0, -0.3, 0.02}, 0.01);
  const auto back = io::transfer_function_from_json(io::to_json(tf));
  EXPECT_EQ(back.num(), tf.num());
  EXPECT_EQ(back.den(), tf.den());
  EXPECT_TRUE(back.is_discrete());
  EXPECT_DOUBLE_EQ(back.ts(), 0.01);
  const auto cont = io::transfer_function_from_json(io::to_json(TransferFunction::continuous({150}, {1, 25, 150})));
  EXPECT_FALSE(cont.is_discrete());
}

TEST(ModelJson, StateSpaceRoundTrip) {
  Eigen::MatrixXd a(2, 2), b(2, 1), c(1, 2), d(1, 1);
  a << 0.5, 0.1, -0.2, 0.3;
  b << 1, 0;
  c << 0.25, -1;
  d << 0.125;
  const StateSpace ss(a, b, c, d, Domain::discrete, 0.1);
  const auto back = io::state_space_from_json(io::to_json(ss));
  EXPECT_EQ(back.a(), a);
  EXPECT_EQ(back.b(), b);
  EXPECT_EQ(back.c(), c);
  EXPECT_EQ(back.d(), d);
  const auto gain = io::state_space_from_json(io::to_json(StateSpace::static_gain(2.0, Domain::discrete, 0.1)));
  EXPECT_EQ(gain.n_states(), 0);
  EXPECT_EQ(gain.d()(0, 0), 2.0);
}

TEST(ArtifactJson, ControllerRoundTrip) {
  const TwoDofController c(0.25, {1.0, 0.5, 0.25}, {0.3, 0.1}, 0.01, DecayEnvelope{1.0, 0.5});
  const auto back = io::controller_from_json(io::to_json(c));
  EXPECT_EQ(back.gamma(), c.gamma());
  EXPECT_EQ(back.g_fb(), c.g_fb());
  EXPECT_EQ(back.g_ff(), c.g_ff());
  ASSERT_TRUE(back.envelope().has_value());
  EXPECT_EQ(back.envelope()->h, 0.5);
}

TEST(ArtifactJson, ControllerRejectsUnknownKeys) {
  auto j = io::to_json(TwoDofController::static_gain(1.0, 0.01));
  j["g_fbb"] = {1.0};
  EXPECT_THROW(io::controller_from_json(j), PreconditionError);
}

TEST(ArtifactJson, SpecRoundTripAndStrictKeys) {
  DissipativitySpec s;
  s.kase = DissipativityCase::C;
  s.alpha1 = 2.0;
  s.M = 300;
  s.epsilon_override = 0.01;
  const auto back = io::spec_from_json(io::to_json(s));
  EXPECT_EQ(back.kase, DissipativityCase::C);
  EXPECT_EQ(back.alpha1, 2.0);
  EXPECT_EQ(back.M, 300);
  ASSERT_TRUE(back.epsilon_override.has_value());
  EXPECT_EQ(*back.epsilon_override, 0.01);
  auto j = io::to_json(s);
  j["nu_1"] = 0.0;
  EXPECT_THROW(io::spec_from_json(j), PreconditionError);
  EXPECT_THROW(io::spec_from_json(io::json{{"case", "D"}}), PreconditionError);
}

TEST(ArtifactCsv, RegressionExportHasLayoutColumns) {
  RegressionProblem p;
  p.layout = {true, 2, 1};
  p.phi = Eigen::MatrixXd::Random(5, 4);
  p.target = Eigen::VectorXd::Random(5);
  std::stringstream ss;
  io::write_regression_csv(ss, p);
  std::vector<std::string> header;
  const Eigen::MatrixXd back = io::read_matrix_csv(ss, &header);
  EXPECT_EQ(header, (std::vector<std::string>{"gamma", "g_fb_0", "g_fb_1", "g_ff_0", "target"}));
  EXPECT_TRUE(back.leftCols(4).isApprox(p.phi, 1e-15));
  EXPECT_TRUE(back.col(4).isApprox(p.target, 1e-15));
  EXPECT_EQ(io::to_json(p).at("columns").size(), 4u);
}

TEST(Provenance, HashIsStandardFnv1a) {
  EXPECT_EQ(io::hex64(io::fnv1a("")), "cbf29ce484222325");
  EXPECT_EQ(io::hex64(io::fnv1a("a")), "af63dc4c8601ec8c");
  EXPECT_EQ(io::hex64(io::fnv1a("foobar")), "85944171f73967e8");
}
