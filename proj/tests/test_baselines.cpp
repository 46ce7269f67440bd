#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ttn/baselines.hpp"

using namespace ttn;

TEST(TtnSvd, ExactRankInput) {
  IndexTree tree = toy_tree();
  std::vector<Index> shape(6, 5);
  TtnTensor in = random_ttn(tree, shape, RankMap::uniform(tree, 2), Decay::none, 3);
  DenseTensor dense = to_dense(in);
  TtnTensor out = ttn_svd(dense, tree, RankMap::uniform(tree, 2));
  EXPECT_LT(rel_error(dense, out), 1e-10);
}

TEST(TtnSvd, TuckerTreeMatchesHosvd) {
  IndexTree tree = tucker_tree(3);
  DenseTensor t = hilbert_tensor(3, 10);
  const int r = 4;
  TtnTensor out = ttn_svd(t, tree, RankMap::uniform(tree, r));
  DenseTensor hosvd = oracle::hosvd_truncation(t, r);
  EXPECT_LT(rel_error(hosvd, to_dense(out)), 1e-10);
}

TEST(TtnSvd, ErrorAboveEckartYoungLowerBound) {
  IndexTree tree = toy_tree();
  DenseTensor t = hilbert_tensor(6, 5);
  const int r = 2;
  TtnTensor out = ttn_svd(t, tree, RankMap::uniform(tree, r));
  const double err = frobenius_norm(t) * rel_error(t, out);
  double max_tail = 0.0;
  for (NodeKey v : tree.nonroot_nodes()) {
    Eigen::BDCSVD<Matrix> svd(matricize(t, tree.node(v).indices));
    double tail = 0;
    for (Eigen::Index i = r; i < svd.singularValues().size(); ++i)
      tail += svd.singularValues()(i) * svd.singularValues()(i);
    max_tail = std::max(max_tail, std::sqrt(tail));
  }
  EXPECT_GE(err, max_tail - 1e-12);
}

TEST(TtnSvd, DeterministicAcrossCalls) {
  IndexTree tree = toy_tree();
  DenseTensor t = hilbert_tensor(6, 5);
  TtnTensor a = ttn_svd(t, tree, RankMap::uniform(tree, 3));
  TtnTensor b = ttn_svd(t, tree, RankMap::uniform(tree, 3));
  EXPECT_NEAR(rel_error(a, b), 0.0, 1e-14);
}

TEST(TtnSvd, LargeRowCountPathAgreesWithExactPath) {
  // compare the blocked-iteration branch against the Gram branch on the same
  // matricization by transposing the tensor layout
  DenseTensor t = hilbert_tensor(3, 14);  // node {1}: 14 x 196 (exact path)
  Matrix m = matricize(t, {1});
  Matrix u_small = detail::leading_left_singular_vectors(m, 3);
  // a tall matricization exercising the iterative branch: 2744 x 14
  DenseTensor big = hilbert_tensor(4, 14);
  Matrix mb = matricize(big, {1, 2, 3});
  ASSERT_GT(mb.rows(), 2048);
  Matrix u_big = detail::leading_left_singular_vectors(mb, 2);
  Eigen::BDCSVD<Matrix> svd(mb, Eigen::ComputeThinU);
  // compare spanned subspaces via projector distance
  Matrix p1 = u_big * u_big.transpose();
  Matrix uref = svd.matrixU().leftCols(2);
  Matrix p2 = uref * uref.transpose();
  EXPECT_LT((p1 - p2).norm(), 1e-8);
  EXPECT_LT((u_small.transpose() * u_small - Matrix::Identity(3, 3)).norm(), 1e-12);
}

TEST(TtnHmt, ExactRankInput) {
  IndexTree tree = toy_tree();
  std::vector<Index> shape(6, 5);
  TtnTensor in = random_ttn(tree, shape, RankMap::uniform(tree, 2), Decay::none, 5);
  DenseTensor dense = to_dense(in);
  TtnTensor out = ttn_hmt(dense, tree, RankMap::uniform(tree, 2), RankMap::uniform(tree, 2),
                          DrmSpec{DrmKind::gaussian, 7});
  EXPECT_LT(rel_error(dense, out), 1e-9);
}

TEST(TtnHmt, OrthonormalBases) {
  IndexTree tree = toy_tree();
  DenseTensor t = hilbert_tensor(6, 4);
  BasisMap b = hmt_bases(t, tree, RankMap::uniform(tree, 3), RankMap::uniform(tree, 0),
                         DrmSpec{DrmKind::gaussian, 9});
  for (const auto& [k, u] : b.u)
    EXPECT_LT((u.transpose() * u - Matrix::Identity(u.cols(), u.cols())).norm(), 1e-12);
}

TEST(TtnHmt, MatchesSvdWhenSketchSpansSingularSpace) {
  // X = leading right singular vectors makes orth(T X) the exact basis
  IndexTree tree = tucker_tree(3);
  DenseTensor t = hilbert_tensor(3, 8);
  const int r = 3;
  BasisMap svdb = svd_bases(t, tree, RankMap::uniform(tree, r));
  BasisMap constructed;
  for (NodeKey v : tree.nonroot_nodes()) {
    Matrix m = matricize(t, tree.node(v).indices);
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinV);
    Matrix x = svd.matrixV().leftCols(r);
    constructed.u[v] = economy_qr(m * x).first;
  }
  TtnTensor a = assemble_from_bases(t, tree, svdb);
  TtnTensor b = assemble_from_bases(t, tree, constructed);
  EXPECT_LT(rel_error(to_dense(a), to_dense(b)), 1e-10);
}

TEST(Recompress, SvdMatchesDenseBaselineOnSmallInstance) {
  IndexTree tree = toy_tree();
  std::vector<Index> shape(6, 6);
  TtnTensor t = random_ttn(tree, shape, RankMap::uniform(tree, 4), Decay::quadratic, 11);
  const RankMap target = RankMap::uniform(tree, 2);
  TtnTensor rank_space = ttn_svd_recompress(t, target);
  TtnTensor dense_path = ttn_svd(to_dense(t), tree, target);
  EXPECT_LT(rel_error(to_dense(dense_path), to_dense(rank_space)), 1e-9);
}

TEST(Recompress, ExactWhenTargetCoversInputRank) {
  IndexTree tree = toy_tree();
  std::vector<Index> shape(6, 8);
  TtnTensor t = random_ttn(tree, shape, RankMap::uniform(tree, 3), Decay::none, 13);
  TtnTensor out = ttn_svd_recompress(t, RankMap::uniform(tree, 3));
  EXPECT_LT(rel_error(t, out), 1e-8);
}

TEST(Recompress, HmtExactWhenTargetCoversInputRank) {
  IndexTree tree = toy_tree();
  std::vector<Index> shape(6, 8);
  TtnTensor t = random_ttn(tree, shape, RankMap::uniform(tree, 3), Decay::none, 17);
  TtnTensor out = ttn_hmt_recompress(t, RankMap::uniform(tree, 3), RankMap::uniform(tree, 2),
                                     DrmSpec{DrmKind::khatri_rao, 19});
  EXPECT_LT(rel_error(t, out), 1e-8);
}

TEST(Recompress, ErrorsDecreaseWithRankForExponentialDecay) {
  IndexTree tree = toy_tree();
  std::vector<Index> shape(6, 12);
  TtnTensor t = random_ttn(tree, shape, RankMap::uniform(tree, 8), Decay::exponential, 23);
  double prev = 2.0;
  for (int r : {2, 4, 6}) {
    TtnTensor out = ttn_svd_recompress(t, RankMap::uniform(tree, r));
    const double err = rel_error(t, out);
    EXPECT_LT(err, prev);
    prev = err;
  }
}

TEST(Baselines, OutputsAreValidTtns) {
  IndexTree tree = balanced_binary_tree(4);
  DenseTensor t = hilbert_tensor(4, 6);
  RankMap r = RankMap::uniform(tree, 3);
  TtnTensor a = ttn_svd(t, tree, r);
  TtnTensor b = ttn_hmt(t, tree, r, RankMap::uniform(tree, 2), DrmSpec{DrmKind::gaussian, 25});
  EXPECT_TRUE(check(a).empty());
  EXPECT_TRUE(check(b).empty());
  EXPECT_TRUE(ttn_ranks(a) == r);
  EXPECT_TRUE(ttn_ranks(b) == r);
}
