#include "fixtures.hpp"
#include "tlm/error.hpp"
#include "tlm/mesh.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace tlm;

namespace {

Mesh two_cells() {
  Mesh m({2, 2}, 1.0);
  m.link(m.global_index(0, 1), m.global_index(1, 0));
  m.set_boundary(m.global_index(0, 0), 0.0);
  m.set_boundary(m.global_index(1, 1), -1.0);
  return m;
}

bool has(const std::vector<std::string>& v, const std::string& needle) {
  return std::any_of(v.begin(), v.end(),
                     [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

}  // namespace

TEST(MeshTest, Indexing) {
  const Mesh m = two_cells();
  EXPECT_EQ(m.port_count(), 4);
  EXPECT_EQ(m.global_index(1, 1), 3);
  EXPECT_EQ(m.partner(1), 2);
  EXPECT_EQ(m.partner(2), 1);
  EXPECT_EQ(m.partner(0), -1);
  EXPECT_THROW(m.global_index(2, 0), Error);
}

TEST(MeshTest, ValidReportEmpty) { EXPECT_TRUE(validate_mesh(two_cells()).empty()); }

TEST(MeshTest, Violations) {
  Mesh m({2}, 1.0);
  m.link(0, 0);
  const auto v = validate_mesh(m);
  EXPECT_TRUE(has(v, "self-paired port 0"));
  EXPECT_TRUE(has(v, "dangling port 1"));

  Mesh both({2}, 1.0);
  both.link(0, 1);
  both.set_boundary(0, 0.5);
  EXPECT_TRUE(has(validate_mesh(both), "both linked and a boundary"));

  Mesh bad_tau({1}, 0.0);
  bad_tau.set_boundary(0, 0.0);
  EXPECT_TRUE(has(validate_mesh(bad_tau), "time step"));

  Mesh relinked({3}, 1.0);
  relinked.link(0, 1);
  relinked.link(1, 2);
  EXPECT_TRUE(has(validate_mesh(relinked), "non-involutive pairing at port 0"));
}

TEST(Connect, LinkCarriesValue) {
  const Mesh m = two_cells();
  Vec out = Vec::Zero(4);
  out(1) = 3.0;
  const Vec in = connect(m, out, Vec::Zero(4));
  EXPECT_EQ(in(2), 3.0);
  EXPECT_EQ(in(1), 0.0);
}

TEST(Connect, ShortCircuitWall) {
  const Mesh m = two_cells();
  Vec out = Vec::Zero(4);
  out(3) = 1.7;
  EXPECT_EQ(connect(m, out, Vec::Zero(4))(3), -1.7);
}

TEST(Connect, MatchedPortWithPhasor) {
  const Mesh m = two_cells();
  CVec exc = CVec::Zero(4);
  exc(0) = cplx(0.3, -0.4);
  CVec out = CVec::Ones(4);
  EXPECT_EQ(connect(m, out, exc)(0), cplx(0.3, -0.4));
}

TEST(Connect, LayoutMismatch) {
  const Mesh m = two_cells();
  try {
    connect(m, Vec(Vec::Zero(3)), Vec(Vec::Zero(4)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LayoutMismatch);
  }
}

TEST(Connect, LinearityAndIsometry) {
  std::mt19937_64 rng(31);
  Mesh m({3, 3, 2}, 1.0);
  m.link(0, 3);
  m.link(1, 6);
  m.link(4, 7);
  m.set_boundary(2, -1.0);
  m.set_boundary(5, 1.0);
  const Vec x = fx::randv(rng, 8), y = fx::randv(rng, 8);
  const Vec z = Vec::Zero(8);
  EXPECT_LT((connect(m, Vec(2.0 * x - 0.5 * y), z) - (2.0 * connect(m, x, z) - 0.5 * connect(m, y, z))).norm(),
            1e-14);
  EXPECT_NEAR(connect(m, x, z).norm(), x.norm(), 1e-14);
  const CMat c = connection_matrix(m);
  EXPECT_LT(max_abs(CMat(c.adjoint() * c) - CMat::Identity(8, 8)), 1e-15);
}

TEST(Connect, ComplexBoundaryNeedsComplexPath) {
  Mesh m({1}, 1.0);
  m.set_boundary(0, cplx(0.0, 1.0));
  EXPECT_THROW(connect(m, Vec(Vec::Zero(1)), Vec(Vec::Zero(1))), Error);
  CVec out = CVec::Ones(1);
  EXPECT_EQ(connect(m, out, CVec::Zero(1))(0), cplx(0.0, 1.0));
}

TEST(ExcitationTest, ChecksPorts) {
  const Mesh m = two_cells();
  Excitation e;
  e.signals[0] = [](long k) { return k == 0 ? 1.0 : 0.0; };
  e.phasors[1] = 1.0;
  e.phasors[9] = 1.0;
  const auto v = e.check(m);
  EXPECT_TRUE(has(v, "non-boundary port 1"));
  EXPECT_TRUE(has(v, "missing port 9"));
  e.phasors.erase(9);
  EXPECT_EQ(e.values_at(0, 4)(0), 1.0);
  EXPECT_EQ(e.values_at(1, 4)(0), 0.0);
  EXPECT_EQ(e.phasor_vector(4)(1), cplx(1.0, 0.0));
}
