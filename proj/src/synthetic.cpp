/*
 * Copyright 2026 The SPDrought Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "spdrought/error.hpp"
#include "spdrought/gridcube.hpp"
#include "spdrought/rng.hpp"

namespace spdrought {
namespace {

using Field = std::vector<double>;

// White noise averaged over a (2r+1)x(2r+1) box (truncated at the grid edge)
// and rescaled to unit standard deviation.
Field smoothed_noise(int rows, int cols, int radius, SplitMix64& rng) {
  Field white(static_cast<std::size_t>(rows) * cols);
  for (auto& v : white) v = rng.normal();
  Field out(white.size(), 0.0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double sum = 0.0;
      int n = 0;
      for (int dr = -radius; dr <= radius; ++dr) {
        for (int dc = -radius; dc <= radius; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
          sum += white[static_cast<std::size_t>(rr) * cols + cc];
          ++n;
        }
      }
      out[static_cast<std::size_t>(r) * cols + c] = sum / n;
    }
  }
  double mean = 0.0;
  for (const double v : out) mean += v;
  mean /= static_cast<double>(out.size());
  double var = 0.0;
  for (const double v : out) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(out.size()));
  if (sd > 0.0) {
    for (auto& v : out) v = (v - mean) / sd;
  }
  return out;
}

// AR(1) anomaly process per pixel whose innovations are spatially smoothed.
Field anomaly_process(int rows, int cols, int weeks, int radius, double rho, SplitMix64& rng) {
  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  Field out(pixels * weeks);
  Field state = smoothed_noise(rows, cols, radius, rng);
  const double innovation = std::sqrt(1.0 - rho * rho);
  for (int t = 0; t < weeks; ++t) {
    if (t > 0) {
      const Field eps = smoothed_noise(rows, cols, radius, rng);
      for (std::size_t p = 0; p < pixels; ++p) state[p] = rho * state[p] + innovation * eps[p];
    }
    for (std::size_t p = 0; p < pixels; ++p) out[p * weeks + t] = state[p];
  }
  return out;
}

struct IndexShape {
  double level, amplitude, phase;
};

}  // namespace

void SynthConfig::validate() const {
  if (rows < 1 || cols < 1 || years < 1 || weeks_per_year < 1) {
    throw Error(ErrorKind::kConfigError, "synthetic extents must be positive");
  }
  if (!(ocean_fraction >= 0.0 && ocean_fraction < 1.0)) {
    throw Error(ErrorKind::kConfigError, "ocean fraction must lie in [0, 1)");
  }
  if (!(nan_fraction >= 0.0 && nan_fraction < 1.0)) {
    throw Error(ErrorKind::kConfigError, "NaN fraction must lie in [0, 1)");
  }
  if (drought_events < 0) throw Error(ErrorKind::kConfigError, "drought event count must be >= 0");
  if (categories < 1 || categories > 65535) throw Error(ErrorKind::kConfigError, "categories out of range");
  if (smoothing_radius < 0) throw Error(ErrorKind::kConfigError, "smoothing radius must be >= 0");
  if (patch_size < 1) throw Error(ErrorKind::kConfigError, "patch size must be positive");
}

Dataset generate_synthetic(const SynthConfig& cfg, std::uint64_t seed, SynthTruth* truth) {
  cfg.validate();
  const int rows = cfg.rows, cols = cfg.cols;
  const int weeks = cfg.years * cfg.weeks_per_year;
  const int wpy = cfg.weeks_per_year;
  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  const double two_pi = 2.0 * std::numbers::pi;

  GridSpec spec;
  spec.rows = rows;
  spec.cols = cols;
  spec.weeks = weeks;
  spec.weeks_per_year = wpy;
  spec.land_mask.assign(pixels, 1);

  // Ocean: the lowest-scoring pixels of a smooth field tilted west-to-east.
  {
    auto rng = rng_stream(seed, "synth.mask");
    Field score = smoothed_noise(rows, cols, 3, rng);
    for (std::size_t p = 0; p < pixels; ++p) {
      const int c = static_cast<int>(p % cols);
      score[p] += 2.5 * (cols > 1 ? static_cast<double>(c) / (cols - 1) : 0.5);
    }
    std::size_t ocean = static_cast<std::size_t>(std::llround(cfg.ocean_fraction * static_cast<double>(pixels)));
    ocean = std::min(ocean, pixels - 1);
    std::vector<std::size_t> order(pixels);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
    for (std::size_t i = 0; i < ocean; ++i) spec.land_mask[order[i]] = 0;
  }

  Dataset ds = Dataset::allocate(spec, cfg.categories);
  const GridSpec& g = ds.spec;

  // Patchwise-constant land cover.
  {
    auto rng = rng_stream(seed, "synth.cover");
    const int prow = (rows + cfg.patch_size - 1) / cfg.patch_size;
    const int pcol = (cols + cfg.patch_size - 1) / cfg.patch_size;
    std::vector<std::uint16_t> patch(static_cast<std::size_t>(prow) * pcol);
    for (auto& id : patch) id = static_cast<std::uint16_t>(rng.below(static_cast<std::uint64_t>(cfg.categories)));
    for (std::size_t p = 0; p < pixels; ++p) {
      if (!g.land_mask[p]) continue;
      const PixelCoord pc = g.coord(p);
      ds.statics.land_cover[p] = patch[static_cast<std::size_t>(pc.row / cfg.patch_size) * pcol + pc.col / cfg.patch_size];
    }
  }

  // Terrain.
  Field elevation(pixels), canopy(pixels);
  {
    auto rng = rng_stream(seed, "synth.terrain");
    const Field relief = smoothed_noise(rows, cols, 4, rng);
    for (std::size_t p = 0; p < pixels; ++p) {
      elevation[p] = std::max(0.0, 1500.0 + 700.0 * relief[p]);
      canopy[p] = 3.0 + 4.0 * (ds.statics.land_cover[p] % 5) + 1.5 * std::abs(rng.normal());
    }
  }

  // Per-category seasonal shapes and per-pixel level offsets for each index.
  std::vector<std::array<IndexShape, kIndexCount>> shapes(static_cast<std::size_t>(cfg.categories));
  std::vector<std::array<double, kIndexCount>> offsets(pixels);
  std::vector<double> precip_phase(static_cast<std::size_t>(cfg.categories));
  {
    auto rng = rng_stream(seed, "synth.params");
    for (auto& s : shapes) {
      s[kSoilMoisture] = {0.25 + 0.15 * rng.uniform(), 0.03 + 0.05 * rng.uniform(), two_pi * rng.uniform()};
      s[kEsi] = {0.55 + 0.25 * rng.uniform(), 0.05 + 0.08 * rng.uniform(), two_pi * rng.uniform()};
      s[kSif] = {0.25 + 0.25 * rng.uniform(), 0.10 + 0.15 * rng.uniform(), two_pi * rng.uniform()};
    }
    for (auto& ph : precip_phase) ph = two_pi * rng.uniform();
    for (auto& o : offsets) {
      o[kSoilMoisture] = 0.04 * rng.normal();
      o[kEsi] = 0.05 * rng.normal();
      o[kSif] = 0.05 * rng.normal();
    }
  }

  // Static attributes moderate how strongly each pixel reacts: land cover sets
  // the sensitivity to moisture supply and drought, elevation the heat stress.
  std::vector<double> sensitivity(static_cast<std::size_t>(cfg.categories));
  {
    auto rng = rng_stream(seed, "synth.sensitivity");
    for (auto& v : sensitivity) v = 0.4 + 1.2 * rng.uniform();
  }

  // Lagged precipitation response kernel (lags 1..8), normalised to sum 1.
  std::vector<double> kernel(8);
  for (std::size_t l = 0; l < kernel.size(); ++l) kernel[l] = std::exp(-static_cast<double>(l) / 3.0);
  const double ksum = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  for (auto& k : kernel) k /= ksum;

  Field wet, heat;
  {
    auto rng = rng_stream(seed, "synth.anomaly");
    wet = anomaly_process(rows, cols, weeks, cfg.smoothing_radius, 0.85, rng);
    heat = anomaly_process(rows, cols, weeks, cfg.smoothing_radius, 0.9, rng);
  }

  // Planted drought blocks.
  std::vector<DroughtEvent> events;
  std::vector<std::uint8_t> in_event(pixels * weeks, 0);
  {
    auto rng = rng_stream(seed, "synth.events");
    const auto land = g.land_pixels();
    for (int e = 0; e < cfg.drought_events; ++e) {
      const int duration = std::min(weeks, 8 + static_cast<int>(rng.below(13)));
      const int half = 3 + static_cast<int>(rng.below(3));
      const PixelCoord center = land[rng.below(land.size())];
      DroughtEvent ev;
      ev.row0 = std::max(0, center.row - half);
      ev.row1 = std::min(rows, center.row + half + 1);
      ev.col0 = std::max(0, center.col - half);
      ev.col1 = std::min(cols, center.col + half + 1);
      const int span = std::max(1, weeks - duration - kEventLag.back());
      ev.week0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(span)));
      ev.week1 = ev.week0 + duration;
      for (int r = ev.row0; r < ev.row1; ++r) {
        for (int c = ev.col0; c < ev.col1; ++c) {
          const std::size_t p = g.pixel_index({r, c});
          for (int t = ev.week0; t < ev.week1; ++t) in_event[p * weeks + t] = 1;
        }
      }
      events.push_back(ev);
    }
  }
  auto event_at = [&](std::size_t p, int t) -> double {
    return (t >= 0 && t < weeks && in_event[p * weeks + t]) ? 1.0 : 0.0;
  };

  auto rng = rng_stream(seed, "synth.noise");
  std::vector<double> precip(weeks), precip_anom(weeks), response(weeks);
  for (std::size_t p = 0; p < pixels; ++p) {
    if (!g.land_mask[p]) continue;
    const int lc = ds.statics.land_cover[p];
    const auto& shape = shapes[static_cast<std::size_t>(lc)];
    const double elev = elevation[p];
    const double sens = sensitivity[static_cast<std::size_t>(lc)];
    const double heat_stress = std::clamp(elev / 1500.0, 0.25, 2.0);
    const double cover_frac = cfg.categories > 1 ? static_cast<double>(lc) / (cfg.categories - 1) : 0.0;
    const double* wp = wet.data() + p * weeks;
    const double* hp = heat.data() + p * weeks;

    for (int t = 0; t < weeks; ++t) {
      const double season = two_pi * static_cast<double>(t % wpy) / wpy;
      const double expected = 20.0 * (1.0 + 0.3 * std::sin(season + precip_phase[static_cast<std::size_t>(lc)]));
      double pr = std::max(0.0, expected + 9.0 * wp[t] + 3.0 * rng.normal());
      if (event_at(p, t) > 0.0) pr *= 0.15;
      precip[t] = pr;
      precip_anom[t] = (pr - expected) / 9.0;
    }
    for (int t = 0; t < weeks; ++t) {
      double acc = 0.0;
      for (std::size_t l = 0; l < kernel.size(); ++l) {
        const int s = t - 1 - static_cast<int>(l);
        acc += kernel[l] * (s >= 0 ? precip_anom[s] : 0.0);
      }
      response[t] = acc;
    }

    double pdsi_state = 0.0, root_state = 0.0;
    for (int t = 0; t < weeks; ++t) {
      const double season = two_pi * static_cast<double>(t % wpy) / wpy;
      const double ev0 = event_at(p, t);
      const double ev1 = event_at(p, t - kEventLag[kEsi]);
      const double ev2 = event_at(p, t - kEventLag[kSif]);

      const double resp_esi = t >= 1 ? response[t - 1] : 0.0;
      const double resp_sif = t >= 2 ? response[t - 2] : 0.0;
      const double sm = shape[kSoilMoisture].level + offsets[p][kSoilMoisture] +
                        shape[kSoilMoisture].amplitude * std::sin(season + shape[kSoilMoisture].phase) +
                        sens * (0.05 * response[t] - 0.12 * ev0) + 0.025 * rng.normal();
      const double esi = shape[kEsi].level + offsets[p][kEsi] +
                         shape[kEsi].amplitude * std::sin(season + shape[kEsi].phase) + sens * (0.06 * resp_esi - 0.15 * ev1) -
                         0.03 * heat_stress * hp[t] + 0.03 * rng.normal();
      const double sif = shape[kSif].level + offsets[p][kSif] +
                         shape[kSif].amplitude * std::max(0.0, std::sin(season + shape[kSif].phase)) +
                         sens * (0.04 * resp_sif - 0.12 * ev2) + 0.03 * rng.normal();

      const double temp = 288.0 + 12.0 * std::sin(season - std::numbers::pi / 2) - 0.0065 * elev +
                          2.5 * hp[t] + 1.5 * ev0 + rng.normal();
      const double rad = std::max(1.0, 180.0 + 90.0 * std::sin(season - std::numbers::pi / 2) - 20.0 * wp[t] +
                                           15.0 * ev0 + 8.0 * rng.normal());
      const double vpd = std::max(0.05, 1.2 + 0.6 * std::sin(season - std::numbers::pi / 2) + 0.3 * hp[t] -
                                            0.2 * wp[t] + 0.5 * ev0 + 0.1 * rng.normal());
      const double wind = std::max(0.1, 4.0 + 1.5 * rng.normal());
      const double pet = std::max(0.01, 0.02 * (temp - 250.0) * (rad / 200.0) * (1.0 + 0.3 * vpd) +
                                            0.05 * rng.normal());
      pdsi_state = 0.96 * pdsi_state + 0.04 * precip_anom[t];
      const double pdsi = 6.0 + 6.0 * pdsi_state + 0.2 * rng.normal();
      const double sp = 1000.0 - 0.11 * elev - 4.0 * wp[t] + 3.0 * ev0 + 1.5 * rng.normal();
      root_state = 0.93 * root_state + 0.07 * response[t];
      const double sm_root = std::max(0.01, 0.35 + offsets[p][kSoilMoisture] + 0.15 * root_state -
                                                0.05 * ev1 + 0.01 * rng.normal());
      const double vod = std::max(0.01, 0.3 + 0.1 * cover_frac + 0.3 * (sif - shape[kSif].level) +
                                            0.02 * rng.normal());
      const double lai = std::max(0.05, 1.0 + 3.0 * cover_frac +
                                            1.5 * std::max(0.0, std::sin(season + shape[kSif].phase)) +
                                            0.2 * rng.normal());

      const std::array<double, kDynamicCount> dyn = {temp, rad, vpd, precip[t], wind, pet,
                                                     pdsi, sp,  sm_root, vod, lai};
      for (int v = 0; v < kDynamicCount; ++v) {
        ds.dynamics.values[ds.dyn_offset(p, t, v)] = static_cast<float>(dyn[v]);
      }
      const std::array<double, kIndexCount> idx = {sm, esi, sif};
      for (int k = 0; k < kIndexCount; ++k) {
        ds.indices.values[ds.index_offset(p, t, k)] = static_cast<float>(std::max(0.001, idx[k]));
      }
    }
  }

  // Missing observations on land.
  if (cfg.nan_fraction > 0.0) {
    auto nan_rng = rng_stream(seed, "synth.nan");
    const float nan = canonical_nan();
    for (std::size_t p = 0; p < pixels; ++p) {
      if (!g.land_mask[p]) continue;
      for (int t = 0; t < weeks; ++t) {
        for (int v = 0; v < kDynamicCount; ++v) {
          if (nan_rng.uniform() < cfg.nan_fraction) ds.dynamics.values[ds.dyn_offset(p, t, v)] = nan;
        }
        for (int k = 0; k < kIndexCount; ++k) {
          if (nan_rng.uniform() < cfg.nan_fraction) ds.indices.values[ds.index_offset(p, t, k)] = nan;
        }
      }
    }
  }

  // Static numeric features, from terrain and the observed index record.
  for (std::size_t p = 0; p < pixels; ++p) {
    if (!g.land_mask[p]) continue;
    ds.statics.numeric[ds.numeric_offset(p, kElevation)] = static_cast<float>(elevation[p]);
    ds.statics.numeric[ds.numeric_offset(p, kCanopyHeight)] = static_cast<float>(canopy[p]);
    for (int k = 0; k < kIndexCount; ++k) {
      double sum = 0.0, sq = 0.0;
      int n = 0;
      for (int t = 0; t < weeks; ++t) {
        const float v = ds.index_value(p, t, k);
        if (std::isnan(v)) continue;
        sum += v;
        sq += static_cast<double>(v) * v;
        ++n;
      }
      float mean = canonical_nan(), sd = canonical_nan();
      if (n > 0) {
        const double m = sum / n;
        mean = static_cast<float>(m);
        sd = static_cast<float>(std::sqrt(std::max(0.0, sq / n - m * m)));
      }
      ds.statics.numeric[ds.numeric_offset(p, kSmMean + 2 * k)] = mean;
      ds.statics.numeric[ds.numeric_offset(p, kSmStd + 2 * k)] = sd;
    }
  }

  if (truth != nullptr) {
    truth->events = std::move(events);
    truth->precipitation_kernel = kernel;
  }
  return ds;
}

}  // namespace spdrought
