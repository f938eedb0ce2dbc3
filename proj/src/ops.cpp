#include "blindsr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "blindsr/errors.hpp"

namespace blindsr {

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_dim(const char* op, const Tensor& a, Index dim) {
  if (a.dim() != dim) {
    throw DimensionError(std::string(op) + ": expected " + std::to_string(dim) + "-D tensor, got " +
                         shape_string(a.shape()));
  }
}

// Unfolds a [C x H x W] image into [(C*k*k) x (H*W)] patch columns, zero padded.
void im2col(const double* in, Index channels, Index height, Index width, Index k, Index pad,
            RowMatrix& cols) {
  cols.resize(channels * k * k, height * width);
  for (Index c = 0; c < channels; ++c) {
    const double* plane = in + c * height * width;
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        double* row = cols.row((c * k + ky) * k + kx).data();
        const Index dx = kx - pad;
        const Index x0 = std::max<Index>(0, -dx);
        const Index x1 = std::min<Index>(width, width - dx);
        for (Index y = 0; y < height; ++y) {
          double* dst = row + y * width;
          const Index sy = y + ky - pad;
          if (sy < 0 || sy >= height || x1 <= x0) {
            std::fill(dst, dst + width, 0.0);
            continue;
          }
          std::fill(dst, dst + x0, 0.0);
          std::memcpy(dst + x0, plane + sy * width + x0 + dx, sizeof(double) * (x1 - x0));
          std::fill(dst + x1, dst + width, 0.0);
        }
      }
    }
  }
}

// Adjoint of im2col: scatters patch-column gradients back onto the image.
void col2im(const RowMatrix& cols, Index channels, Index height, Index width, Index k, Index pad,
            double* out) {
  for (Index c = 0; c < channels; ++c) {
    double* plane = out + c * height * width;
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const double* row = cols.row((c * k + ky) * k + kx).data();
        const Index dx = kx - pad;
        const Index x0 = std::max<Index>(0, -dx);
        const Index x1 = std::min<Index>(width, width - dx);
        for (Index y = 0; y < height; ++y) {
          const Index sy = y + ky - pad;
          if (sy < 0 || sy >= height) continue;
          const double* src = row + y * width;
          double* dst = plane + sy * width + dx;
          for (Index x = x0; x < x1; ++x) dst[x] += src[x];
        }
      }
    }
  }
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape("add", a.value(), b.value());
  Tensor out(a.shape(), a.value().data() + b.value().data());
  return a.tape().record(std::move(out), {a, b}, [](const Eigen::VectorXd& g, auto grads) {
    if (grads[0]) *grads[0] += g;
    if (grads[1]) *grads[1] += g;
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a.value(), b.value());
  Tensor out(a.shape(), a.value().data() - b.value().data());
  return a.tape().record(std::move(out), {a, b}, [](const Eigen::VectorXd& g, auto grads) {
    if (grads[0]) *grads[0] += g;
    if (grads[1]) *grads[1] -= g;
  });
}

Var scale(Var a, double factor) {
  Tensor out(a.shape(), a.value().data() * factor);
  return a.tape().record(std::move(out), {a}, [factor](const Eigen::VectorXd& g, auto grads) {
    *grads[0] += factor * g;
  });
}

Var multiply(Var a, const Tensor& mask) {
  require_same_shape("multiply", a.value(), mask);
  Tensor out(a.shape(), a.value().data().cwiseProduct(mask.data()));
  Eigen::VectorXd m = mask.data();
  return a.tape().record(std::move(out), {a}, [m = std::move(m)](const Eigen::VectorXd& g, auto grads) {
    *grads[0] += g.cwiseProduct(m);
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape().record(std::move(out), {a}, [](const Eigen::VectorXd& g, auto grads) {
    *grads[0] += g;
  });
}

Var sum(Var a) {
  Tensor out = Tensor::scalar(a.value().data().sum());
  return a.tape().record(std::move(out), {a}, [](const Eigen::VectorXd& g, auto grads) {
    grads[0]->array() += g[0];
  });
}

Var sum_squares(Var a) {
  Tensor out = Tensor::scalar(a.value().data().squaredNorm());
  return a.tape().record(std::move(out), {a}, [a](const Eigen::VectorXd& g, auto grads) {
    *grads[0] += (2.0 * g[0]) * a.value().data();
  });
}

Var l1_loss(Var a, const Tensor& target) {
  require_same_shape("l1_loss", a.value(), target);
  Eigen::VectorXd diff = a.value().data() - target.data();
  const double n = static_cast<double>(diff.size());
  Tensor out = Tensor::scalar(diff.cwiseAbs().sum() / n);
  Eigen::VectorXd sign = diff.unaryExpr([](double d) { return d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0); });
  return a.tape().record(std::move(out), {a}, [sign = std::move(sign), n](const Eigen::VectorXd& g, auto grads) {
    *grads[0] += (g[0] / n) * sign;
  });
}

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.dim() != 2 || bv.dim() != 2 || av.extent(1) != bv.extent(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_string(av.shape()) + " and " +
                         shape_string(bv.shape()));
  }
  const Index m = av.extent(0), n = bv.extent(1);
  Tensor out({m, n});
  out.matrix().noalias() = av.matrix() * bv.matrix();
  return a.tape().record(std::move(out), {a, b}, [a, b, m, n](const Eigen::VectorXd& g, auto grads) {
    ConstMatrixMap gm(g.data(), m, n);
    if (grads[0]) {
      MatrixMap ga(grads[0]->data(), m, a.shape()[1]);
      ga.noalias() += gm * b.value().matrix().transpose();
    }
    if (grads[1]) {
      MatrixMap gb(grads[1]->data(), b.shape()[0], n);
      gb.noalias() += a.value().matrix().transpose() * gm;
    }
  });
}

Var transpose(Var a) {
  require_dim("transpose", a.value(), 2);
  const Index m = a.shape()[0], n = a.shape()[1];
  Tensor out({n, m});
  out.matrix() = a.value().matrix().transpose();
  return a.tape().record(std::move(out), {a}, [m, n](const Eigen::VectorXd& g, auto grads) {
    MatrixMap(grads[0]->data(), m, n) += ConstMatrixMap(g.data(), n, m).transpose();
  });
}

Var column_sum(Var a) {
  require_dim("column_sum", a.value(), 2);
  const Index m = a.shape()[0], n = a.shape()[1];
  Tensor out({1, n});
  out.matrix() = a.value().matrix().colwise().sum();
  return a.tape().record(std::move(out), {a}, [m, n](const Eigen::VectorXd& g, auto grads) {
    MatrixMap(grads[0]->data(), m, n).rowwise() += ConstMatrixMap(g.data(), 1, n).row(0);
  });
}

Var column_mean(Var a) {
  require_dim("column_mean", a.value(), 2);
  return scale(column_sum(a), 1.0 / static_cast<double>(a.shape()[0]));
}

Var conv2d(Var input, Var weights, Var bias, Index padding) {
  const Tensor& x = input.value();
  const Tensor& w = weights.value();
  const Tensor& b = bias.value();
  if (x.dim() != 3 || w.dim() != 4) {
    throw DimensionError("conv2d: expected input [C x H x W] and weights [Cout x Cin x k x k], got " +
                         shape_string(x.shape()) + " and " + shape_string(w.shape()));
  }
  const Index cin = x.extent(0), h = x.extent(1), wd = x.extent(2);
  const Index cout = w.extent(0), k = w.extent(2);
  if (w.extent(1) != cin || w.extent(3) != k) {
    throw DimensionError("conv2d: weights " + shape_string(w.shape()) + " incompatible with input " +
                         shape_string(x.shape()));
  }
  if (k % 2 == 0) throw UnsupportedError("conv2d: even kernel size " + std::to_string(k) + " is not supported");
  if (padding != (k - 1) / 2) {
    throw UnsupportedError("conv2d: only same padding ((k-1)/2) is supported, got " + std::to_string(padding));
  }
  if (b.size() != cout) {
    throw DimensionError("conv2d: bias " + shape_string(b.shape()) + " does not match " +
                         std::to_string(cout) + " output channels");
  }

  RowMatrix cols;
  im2col(x.data().data(), cin, h, wd, k, padding, cols);
  ConstMatrixMap wm(w.data().data(), cout, cin * k * k);
  Tensor out({cout, h, wd});
  MatrixMap om(out.data().data(), cout, h * wd);
  om.noalias() = wm * cols;
  om.colwise() += b.data();

  return input.tape().record(
      std::move(out), {input, weights, bias},
      [input, weights, cin, cout, h, wd, k, padding](const Eigen::VectorXd& g, auto grads) {
        ConstMatrixMap gm(g.data(), cout, h * wd);
        if (grads[2]) *grads[2] += gm.rowwise().sum();
        if (grads[1]) {
          RowMatrix cols;
          im2col(input.value().data().data(), cin, h, wd, k, padding, cols);
          MatrixMap(grads[1]->data(), cout, cin * k * k).noalias() += gm * cols.transpose();
        }
        if (grads[0]) {
          ConstMatrixMap wm(weights.value().data().data(), cout, cin * k * k);
          RowMatrix dcols = wm.transpose() * gm;
          col2im(dcols, cin, h, wd, k, padding, grads[0]->data());
        }
      });
}

Var leaky_relu(Var input, double slope) {
  if (!(slope >= 0.0 && slope < 1.0)) throw ContractError("leaky_relu: slope must lie in [0, 1)");
  const Eigen::VectorXd& x = input.value().data();
  Tensor out(input.shape(), x.unaryExpr([slope](double v) { return v > 0 ? v : slope * v; }));
  return input.tape().record(std::move(out), {input}, [input, slope](const Eigen::VectorXd& g, auto grads) {
    const Eigen::VectorXd& x = input.value().data();
    *grads[0] += g.binaryExpr(x, [slope](double gv, double xv) { return xv > 0 ? gv : slope * gv; });
  });
}

Var upsample_nearest(Var input, Index factor) {
  const Tensor& x = input.value();
  require_dim("upsample_nearest", x, 3);
  if (factor < 1) throw ContractError("upsample_nearest: factor must be >= 1");
  const Index c = x.extent(0), h = x.extent(1), w = x.extent(2);
  const Index oh = h * factor, ow = w * factor;
  Tensor out({c, oh, ow});
  for (Index ch = 0; ch < c; ++ch) {
    for (Index y = 0; y < oh; ++y) {
      const double* src = x.data().data() + (ch * h + y / factor) * w;
      double* dst = out.data().data() + (ch * oh + y) * ow;
      for (Index xx = 0; xx < ow; ++xx) dst[xx] = src[xx / factor];
    }
  }
  return input.tape().record(std::move(out), {input}, [c, h, w, factor](const Eigen::VectorXd& g, auto grads) {
    const Index oh = h * factor, ow = w * factor;
    double* gi = grads[0]->data();
    for (Index ch = 0; ch < c; ++ch) {
      for (Index y = 0; y < oh; ++y) {
        const double* src = g.data() + (ch * oh + y) * ow;
        double* dst = gi + (ch * h + y / factor) * w;
        for (Index xx = 0; xx < ow; ++xx) dst[xx / factor] += src[xx];
      }
    }
  });
}

Var feature_matrix(Var features) {
  const Tensor& x = features.value();
  require_dim("feature_matrix", x, 3);
  const Index c = x.extent(0);
  return transpose(reshape(features, {c, x.extent(1) * x.extent(2)}));
}

}  // namespace blindsr
