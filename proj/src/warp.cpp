#include "moco5d/warp.hpp"

#include "moco5d/parallel.hpp"

#include <cmath>

namespace moco5d {

namespace {

// Clamped tap indices and weights along one axis; invalid taps get zero weight.
struct Taps
{
  Index idx[4];
  double w[4];
  double dw[4];
  bool any;
};

inline Taps axis_taps(double p, Index n)
{
  Taps t;
  double const fl = std::floor(p);
  double const f = p - fl;
  Index const base = static_cast<Index>(fl) - 1;
  bspline_weights_unchecked(f, t.w);
  bspline_derivative_weights_unchecked(f, t.dw);
  t.any = false;
  for (int k = 0; k < 4; k++) {
    Index const i = base + k;
    if (i < 0 || i >= n) {
      t.idx[k] = 0;
      t.w[k] = 0.0;
      t.dw[k] = 0.0;
    } else {
      t.idx[k] = i;
      t.any = true;
    }
  }
  return t;
}

struct Sample
{
  Cx v = 0.0;
  Cx g[3] = {0.0, 0.0, 0.0};
};

template <bool Grad>
inline Sample sample(Cx const *c, Dims const &d, Taps const &tx, Taps const &ty, Taps const &tz)
{
  Sample s;
  for (int a = 0; a < 4; a++) {
    if (tx.w[a] == 0.0 && tx.dw[a] == 0.0) { continue; }
    Cx va = 0.0, gya = 0.0, gza = 0.0;
    for (int b = 0; b < 4; b++) {
      if (ty.w[b] == 0.0 && ty.dw[b] == 0.0) { continue; }
      Cx const *row = c + (tx.idx[a] * d.ny + ty.idx[b]) * d.nz;
      Cx sv = 0.0, sd = 0.0;
      for (int k = 0; k < 4; k++) {
        Cx const ck = row[tz.idx[k]];
        sv += tz.w[k] * ck;
        if constexpr (Grad) { sd += tz.dw[k] * ck; }
      }
      va += ty.w[b] * sv;
      if constexpr (Grad) {
        gya += ty.dw[b] * sv;
        gza += ty.w[b] * sd;
      }
    }
    s.v += tx.w[a] * va;
    if constexpr (Grad) {
      s.g[0] += tx.dw[a] * va;
      s.g[1] += tx.w[a] * gya;
      s.g[2] += tx.w[a] * gza;
    }
  }
  return s;
}

inline void scatter(Cx *gc, Dims const &d, Taps const &tx, Taps const &ty, Taps const &tz, Cx g)
{
  for (int a = 0; a < 4; a++) {
    if (tx.w[a] == 0.0) { continue; }
    for (int b = 0; b < 4; b++) {
      if (ty.w[b] == 0.0) { continue; }
      Cx const gab = tx.w[a] * ty.w[b] * g;
      Cx *row = gc + (tx.idx[a] * d.ny + ty.idx[b]) * d.nz;
      for (int k = 0; k < 4; k++) { row[tz.idx[k]] += tz.w[k] * gab; }
    }
  }
}

} // namespace

Warper::Warper(DeformationField const &field)
  : Warper(field.evaluate())
{
}

Warper::Warper(DenseField displacement)
  : disp_{std::move(displacement)}
  , prefilter_{disp_.dims}
{
}

ComplexVolume Warper::apply(ComplexVolume const &tmpl) const
{
  Dims const d = disp_.dims;
  require_shape(tmpl.dims() == d, "warp: template dims do not match field");
  std::vector<Cx> coef(tmpl.vector());
  prefilter_.apply(coef);
  ComplexVolume out(d, tmpl.spacing());
  Cx *o = out.data().data();
  parallel_for(d.nx, [&](Index lo, Index hi, int) {
    for (Index x = lo; x < hi; x++) {
      for (Index y = 0; y < d.ny; y++) {
        for (Index z = 0; z < d.nz; z++) {
          Index const i = d.index(x, y, z);
          Taps const tx = axis_taps(x + disp_.u[0][i], d.nx);
          Taps const ty = axis_taps(y + disp_.u[1][i], d.ny);
          Taps const tz = axis_taps(z + disp_.u[2][i], d.nz);
          if (!(tx.any && ty.any && tz.any)) { continue; }
          o[i] = sample<false>(coef.data(), d, tx, ty, tz).v;
        }
      }
    }
  });
  return out;
}

ComplexVolume Warper::apply_adjoint(ComplexVolume const &cotangent) const
{
  ComplexVolume g;
  DenseField unused;
  vjp(ComplexVolume{}, cotangent, g, unused);
  return g;
}

void Warper::vjp(ComplexVolume const &tmpl, ComplexVolume const &cotangent, ComplexVolume &g_tmpl, DenseField &g_disp) const
{
  Dims const d = disp_.dims;
  require_shape(cotangent.dims() == d, "warp vjp: cotangent dims do not match field");
  bool const want_disp = tmpl.size() > 0;
  std::vector<Cx> coef;
  if (want_disp) {
    require_shape(tmpl.dims() == d, "warp vjp: template dims do not match field");
    coef = tmpl.vector();
    prefilter_.apply(coef);
    g_disp = DenseField(d);
  }
  int const workers = thread_count();
  std::vector<std::vector<Cx>> partial(workers);
  Cx const *cot = cotangent.data().data();
  parallel_for(d.nx, [&](Index lo, Index hi, int w) {
    auto &gc = partial[w];
    gc.assign(d.size(), Cx{0.0});
    for (Index x = lo; x < hi; x++) {
      for (Index y = 0; y < d.ny; y++) {
        for (Index z = 0; z < d.nz; z++) {
          Index const i = d.index(x, y, z);
          Cx const g = cot[i];
          if (g == Cx{0.0}) { continue; }
          Taps const tx = axis_taps(x + disp_.u[0][i], d.nx);
          Taps const ty = axis_taps(y + disp_.u[1][i], d.ny);
          Taps const tz = axis_taps(z + disp_.u[2][i], d.nz);
          if (!(tx.any && ty.any && tz.any)) { continue; }
          scatter(gc.data(), d, tx, ty, tz, g);
          if (want_disp) {
            Sample const s = sample<true>(coef.data(), d, tx, ty, tz);
            for (int a = 0; a < 3; a++) {
              g_disp.u[a][i] = g.real() * s.g[a].real() + g.imag() * s.g[a].imag();
            }
          }
        }
      }
    }
  });
  std::vector<Cx> total(d.size(), Cx{0.0});
  reduce_partials(partial, total);
  prefilter_.apply(total);
  g_tmpl = ComplexVolume(d, cotangent.spacing(), std::move(total));
}

ComplexVolume Warper::jvp_displacement(ComplexVolume const &tmpl, DenseField const &dd) const
{
  Dims const d = disp_.dims;
  require_shape(tmpl.dims() == d && dd.dims == d, "warp jvp: dims mismatch");
  std::vector<Cx> coef(tmpl.vector());
  prefilter_.apply(coef);
  ComplexVolume out(d, tmpl.spacing());
  Cx *o = out.data().data();
  parallel_for(d.nx, [&](Index lo, Index hi, int) {
    for (Index x = lo; x < hi; x++) {
      for (Index y = 0; y < d.ny; y++) {
        for (Index z = 0; z < d.nz; z++) {
          Index const i = d.index(x, y, z);
          Taps const tx = axis_taps(x + disp_.u[0][i], d.nx);
          Taps const ty = axis_taps(y + disp_.u[1][i], d.ny);
          Taps const tz = axis_taps(z + disp_.u[2][i], d.nz);
          if (!(tx.any && ty.any && tz.any)) { continue; }
          Sample const s = sample<true>(coef.data(), d, tx, ty, tz);
          o[i] = s.g[0] * dd.u[0][i] + s.g[1] * dd.u[1][i] + s.g[2] * dd.u[2][i];
        }
      }
    }
  });
  return out;
}

ComplexVolume warp(ComplexVolume const &tmpl, DeformationField const &field)
{
  require_shape(tmpl.dims() == field.volume_dims(), "warp: template dims do not match field");
  return Warper(field).apply(tmpl);
}

WarpGradients warp_vjp(ComplexVolume const &tmpl, DeformationField const &field, ComplexVolume const &cotangent)
{
  require_shape(tmpl.dims() == field.volume_dims(), "warp vjp: template dims do not match field");
  Warper const w(field);
  WarpGradients out;
  DenseField g_disp;
  w.vjp(tmpl, cotangent, out.tmpl, g_disp);
  out.field = field.evaluate_adjoint(g_disp);
  return out;
}

ComplexVolume warp_jvp(
  ComplexVolume const &tmpl, DeformationField const &field, ComplexVolume const &d_tmpl, DeformationField const &d_field)
{
  require_shape(tmpl.same_shape(d_tmpl) && field.same_shape(d_field), "warp jvp: tangent shape mismatch");
  Warper const w(field);
  ComplexVolume out = w.apply(d_tmpl);
  out += w.jvp_displacement(tmpl, d_field.evaluate());
  return out;
}

} // namespace moco5d
