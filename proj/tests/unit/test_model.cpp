#include <doctest.h>

#include <filesystem>

#include "hrm/adam.hpp"
#include "hrm/checkpoint.hpp"
#include "hrm/dataset.hpp"
#include "hrm/errors.hpp"
#include "hrm/model.hpp"
#include "hrm/rng.hpp"
#include "hrm/symmetry.hpp"

using namespace hrm;
using MD = Matrix<double>;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.width = 16;
  c.heads = 2;
  c.max_segments = 3;
  c.seed = 7;
  return c;
}

PuzzleGrid sample_puzzle() { return parse_grid("1..4.4..2......1", 2); }

std::uint64_t hash_matrix(const MD& m) {
  return fnv1a(std::string_view(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double)));
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_NOTHROW(ModelConfig::desk_scale().validate());
  CHECK_NOTHROW(ModelConfig::full_scale().validate());
  ModelConfig c;
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = ModelConfig{};
  c.min_segments = 9;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = ModelConfig{};
  c.n_cycles = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = ModelConfig{};
  c.epsilon = 1.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK(config_from_json(config_to_json(ModelConfig::full_scale())) == ModelConfig::full_scale());

  const ModelConfig d = ModelConfig::desk_scale();
  CHECK(d.vocab() == 5);
  CHECK(d.seq_len() == 16);
  CHECK(ModelConfig::full_scale().seq_len() == 81);
}

TEST_CASE("parameter initialization") {
  const ModelConfig c = small_config();
  auto p = init_params<double>(c);
  CHECK(p.token_embedding.rows() == 5);
  CHECK(p.position_embedding.rows() == 16);
  CHECK(p.low.gate.cols() == 32);
  CHECK(p.q_weight.isZero());
  CHECK(p.q_bias.isZero());
  CHECK(p.z_init.rows() == 1);
  CHECK(p.z_init.cols() == 16);
  CHECK(p.z_init.cwiseAbs().maxCoeff() <= 2.0);  // truncated at two standard deviations
  CHECK(p.trainable().size() + 1 == p.named(true).size());
  for (const auto* m : p.trainable()) CHECK(m != &p.z_init);
  CHECK(p.named(false).size() == p.trainable().size());

  const auto again = init_params<double>(c);
  CHECK(again.low.wq == p.low.wq);
  ModelConfig other = c;
  other.seed = 8;
  CHECK_FALSE(init_params<double>(other).low.wq == p.low.wq);

  const auto f = p.cast<float>().cast<double>();
  CHECK((f.low.wq - p.low.wq).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("input embedding") {
  const ModelConfig c = small_config();
  const auto p = init_params<double>(c);
  const PuzzleGrid a = sample_puzzle();
  PuzzleGrid b = a;
  b.set(5, 3);
  const MD ea = embed_input(a, p, c);
  const MD eb = embed_input(b, p, c);
  CHECK(ea.rows() == 16);
  for (int r = 0; r < 16; ++r) CHECK(((ea.row(r) - eb.row(r)).norm() == 0.0) == (r != 5));

  const MD blank = embed_input(PuzzleGrid(2), p, c);
  for (int r = 0; r < 16; ++r) {
    CHECK(blank.row(r).isApprox(p.token_embedding.row(0) + p.position_embedding.row(r)));
  }

  // The embedding is not relabel-invariant.
  GridTransform t = GridTransform::identity(2);
  t.relabel = {2, 1, 3, 4};
  CHECK_FALSE(embed_input(apply_transform(t, a), p, c).isApprox(ea));
  CHECK_THROWS_AS(embed_input(PuzzleGrid(3), p, c), ShapeError);
}

TEST_CASE("segment schedule and value semantics") {
  ModelConfig c = small_config();
  const auto p = init_params<double>(c);
  const MD x = embed_input(sample_puzzle(), p, c);
  const LatentState<double> z0 = initial_state(p, c);
  CHECK(z0.z.rows() == 16);
  for (int r = 0; r < 16; ++r) CHECK(z0.z.row(r) == p.z_init.row(0));

  const std::uint64_t hz = hash_matrix(z0.z);
  const std::uint64_t hx = hash_matrix(x);
  SegmentCounters counters;
  const auto z1 = segment_forward(z0, x, p, c, &counters);
  CHECK(counters.low_calls == c.n_cycles * c.t_low);
  CHECK(counters.high_calls == c.n_cycles);
  CHECK(hash_matrix(z0.z) == hz);
  CHECK(hash_matrix(x) == hx);
  CHECK(segment_forward(z0, x, p, c).z == z1.z);

  c.n_cycles = 1;
  c.t_low = 1;
  SegmentCounters one;
  segment_forward(z0, x, p, c, &one);
  CHECK(one.low_calls == 1);
  CHECK(one.high_calls == 1);

  c.n_cycles = 3;
  c.t_low = 4;
  SegmentCounters many;
  segment_forward(z0, x, p, c, &many);
  CHECK(many.low_calls == 12);
  CHECK(many.high_calls == 3);
}

TEST_CASE("value path matches the tape graph") {
  const ModelConfig c = small_config();
  const auto p = init_params<double>(c);
  const PuzzleGrid g = sample_puzzle();
  const MD x = embed_input(g, p, c);
  const auto z1 = segment_forward(initial_state(p, c), x, p, c);

  Tape<double> tape;
  const ParamVars pv = bind_params(tape, p, false);
  const std::vector<int> tokens = grid_tokens(g);
  const Var xe = embed_tokens(tape, pv, std::span<const int>(tokens), c.seq_len());
  CHECK(tape.value(xe).isApprox(x, 1e-14));
  const Var z = segment_graph(tape, tape.leaf(p.z_init.replicate(16, 1)), xe, pv, c);
  CHECK((tape.value(z) - z1.z).cwiseAbs().maxCoeff() < 1e-12);
  const Var logits = output_logits(tape, z, pv);
  CHECK((tape.value(logits) - decode_output(z1, p, c).logits).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("decoding and the Q-head") {
  const ModelConfig c = small_config();
  auto p = init_params<double>(c);
  const auto z = segment_forward(initial_state(p, c), embed_input(sample_puzzle(), p, c), p, c);
  const Decoded<double> d = decode_output(z, p, c);
  CHECK(d.prediction.cell_count() == 16);
  CHECK(d.logits.cols() == 5);

  MD ties = MD::Zero(16, 5);
  ties(3, 2) = 1.0;
  ties(3, 4) = 1.0;
  const auto grids = argmax_grids(ties, 2);
  REQUIRE(grids.size() == 1);
  CHECK(grids[0][0] == 0);
  CHECK(grids[0][3] == 2);
  CHECK_THROWS(argmax_grids(MD(MD::Zero(15, 5)), 2));

  LatentState<double> zero{MD::Zero(16, 16)};
  const HaltDecision q0 = q_head(zero, p, c);
  CHECK(q0.q_halt == 0.0);
  CHECK(q0.q_continue == 0.0);
  CHECK_FALSE(q0.halted);

  Rng rng(3);
  for (Eigen::Index i = 0; i < p.q_weight.size(); ++i) p.q_weight.data()[i] = rng.normal();
  p.q_bias << 0.25, -0.5;
  const HaltDecision q = q_head(z, p, c);
  const MD pooled = z.z.colwise().mean();
  CHECK(q.q_halt == doctest::Approx((pooled * p.q_weight.col(0))(0, 0) + 0.25));
  CHECK(q.q_continue == doctest::Approx((pooled * p.q_weight.col(1))(0, 0) - 0.5));
  CHECK(q.halted == (q.q_halt > q.q_continue));
}

TEST_CASE("checkpoint round trip") {
  const ModelConfig c = small_config();
  Checkpoint ck;
  ck.config = c;
  ck.step = 1234;
  ck.manifest_hash = 0xfeedfacecafebeefULL;
  ck.params = init_params<float>(c);
  const std::string bytes = encode_checkpoint(ck);
  CHECK(bytes.substr(0, 8) == "HRMCKPT1");
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(back.config == c);
  CHECK(back.step == 1234);
  CHECK(back.manifest_hash == ck.manifest_hash);
  CHECK_FALSE(back.optimizer.has_value());
  CHECK(encode_checkpoint(back) == bytes);

  auto weights = ck.params.trainable();
  ck.optimizer = AdamState<float>::zeros_like(weights);
  ck.optimizer->step = 17;
  ck.optimizer->first_moment[3](0, 0) = 0.5f;
  const std::string with_opt = encode_checkpoint(ck);
  const Checkpoint back2 = decode_checkpoint(with_opt);
  REQUIRE(back2.optimizer.has_value());
  CHECK(back2.optimizer->step == 17);
  CHECK(back2.optimizer->first_moment[3](0, 0) == 0.5f);
  CHECK(encode_checkpoint(back2) == with_opt);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS(decode_checkpoint(bad));
  CHECK_THROWS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)));
  CHECK_THROWS(decode_checkpoint(bytes + "x"));

  const auto dir = std::filesystem::temp_directory_path() / "hrm_ckpt_test";
  std::filesystem::remove_all(dir);
  save_checkpoint(dir / "a.bin", ck);
  CHECK(encode_checkpoint(load_checkpoint(dir / "a.bin")) == with_opt);
  try {
    load_checkpoint(dir / "missing.bin");
    FAIL("expected an error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("missing.bin") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}
