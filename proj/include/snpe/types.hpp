#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace snpe {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// All randomness in the library flows through this engine so that a
// (config, seed) pair reproduces a run bit-for-bit on a given platform.
using Rng = std::mt19937_64;

// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
double symmetric_spectral_norm(const Matrix& m);

// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& m);

// Largest deviation from symmetry, max |m - m^T|.
double asymmetry(const Matrix& m);

// splitmix64 finalizer; used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t x);

// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 1469598103934665603ULL);

}  // namespace snpe
