/**
 * Procedural latent-diffusion stand-in.
 *
 * No pretrained checkpoint ships with this bridge; instead a small procedural
 * model reproduces the *interface and qualitative behavior* of a frozen
 * text-conditioned latent diffusion model:
 *
 *  - an image encoder (RGB -> 16x16 latent; there is a decode counter but no
 *    decoder, matching how the reward path never decodes),
 *  - a caption "text encoder" mapping prompts to deterministic latent
 *    templates,
 *  - a one-step noise predictor whose conditional branch applies
 *    recognition-gated guidance: a matched filter on the *corrupted* latent
 *    decides how strongly the prediction is pulled toward the caption's
 *    template, so conditioning does extra work exactly when the input
 *    contains features aligned with the caption.
 *
 * A real checkpoint would slot in behind the same three methods.
 */

import { Rng, fnv1a } from "./rng.js";

export const LATENT = 16;
export const NATIVE_RESOLUTION = 64;
export const SCHEDULE_T = 1000;
export const MAX_WINDOW = 8;
export const MODEL_ID = "procedural-gm-v1";

const UNCOND_SIGMA = 0.6; // broad unconditional prior std
const PRIOR_MEAN = 0.08;  // unconditional prior mean (mostly-dark scenes)
const GATE_CENTER = 0.4;  // matched-filter threshold
const GATE_WIDTH = 0.5;
const GATE_MAX = 0.8;

export function alphaBars(): Float64Array {
  const out = new Float64Array(SCHEDULE_T);
  let prod = 1.0;
  for (let i = 0; i < SCHEDULE_T; i++) {
    const beta = 1e-4 + ((0.02 - 1e-4) * i) / (SCHEDULE_T - 1);
    prod *= 1.0 - beta;
    out[i] = prod;
  }
  return out;
}

/** Nearest-neighbor resize of an RGB u8 frame to the native resolution. */
export function resizeNearest(
  frame: Uint8Array, height: number, width: number, size: number,
): Uint8Array {
  if (height === size && width === size) {
    return frame;
  }
  const out = new Uint8Array(size * size * 3);
  for (let i = 0; i < size; i++) {
    const si = Math.min(height - 1, Math.floor((i * height) / size));
    for (let j = 0; j < size; j++) {
      const sj = Math.min(width - 1, Math.floor((j * width) / size));
      for (let c = 0; c < 3; c++) {
        out[(i * size + j) * 3 + c] = frame[(si * width + sj) * 3 + c];
      }
    }
  }
  return out;
}

export class ProceduralDiffusionModel {
  readonly alphaBars = alphaBars();
  decodeCalls = 0;
  private templates = new Map<string, Float64Array>();

  /** RGB u8 frame (any size) -> 16x16 latent in [0, 1]. */
  encode(frame: Uint8Array, height: number, width: number): Float64Array {
    const native = resizeNearest(frame, height, width, NATIVE_RESOLUTION);
    const block = NATIVE_RESOLUTION / LATENT;
    const latent = new Float64Array(LATENT * LATENT);
    for (let i = 0; i < LATENT; i++) {
      for (let j = 0; j < LATENT; j++) {
        let acc = 0;
        for (let bi = 0; bi < block; bi++) {
          for (let bj = 0; bj < block; bj++) {
            const base = ((i * block + bi) * NATIVE_RESOLUTION + j * block + bj) * 3;
            acc += native[base] + native[base + 1] + native[base + 2];
          }
        }
        latent[i * LATENT + j] = acc / (block * block * 3 * 255);
      }
    }
    return latent;
  }

  /** The reward path never reconstructs images; calling this is a bug. */
  decode(): never {
    this.decodeCalls += 1;
    throw new Error("the bridge never decodes latents");
  }

  /** Deterministic caption grounding: one or two latent intensity bumps. */
  captionTemplate(caption: string): Float64Array {
    const key = caption.trim().toLowerCase();
    const cached = this.templates.get(key);
    if (cached !== undefined) {
      return cached;
    }
    const rng = new Rng(fnv1a(key));
    const bumps = 1 + (fnv1a(key + "#count") % 2);
    const template = new Float64Array(LATENT * LATENT);
    for (let b = 0; b < bumps; b++) {
      const cx = 2 + rng.uniform() * (LATENT - 4);
      const cy = 2 + rng.uniform() * (LATENT - 4);
      const radius = 1.5 + rng.uniform() * 1.5;
      for (let i = 0; i < LATENT; i++) {
        for (let j = 0; j < LATENT; j++) {
          const d2 = (j - cx) ** 2 + (i - cy) ** 2;
          const v = Math.exp(-d2 / (2 * radius * radius));
          const idx = i * LATENT + j;
          template[idx] = Math.max(template[idx], v);
        }
      }
    }
    this.templates.set(key, template);
    return template;
  }

  /**
   * One-step conditional/unconditional noise predictions on a corrupted
   * latent. Returns both predictions so reward terms share the same input.
   */
  predictNoisePair(
    zt: Float64Array, t: number, caption: string,
  ): { cond: Float64Array; uncond: Float64Array } {
    const ab = this.alphaBars[t];
    const s = Math.sqrt(ab);
    const v = 1.0 - ab;
    const sqv = Math.sqrt(v);
    const shrink = (UNCOND_SIGMA * UNCOND_SIGMA * s) / (ab * UNCOND_SIGMA * UNCOND_SIGMA + v);
    const bias = (v * PRIOR_MEAN) / (ab * UNCOND_SIGMA * UNCOND_SIGMA + v);
    const D = zt.length;
    const x0u = new Float64Array(D);
    for (let d = 0; d < D; d++) {
      x0u[d] = shrink * zt[d] + bias;
    }
    const uncond = new Float64Array(D);
    for (let d = 0; d < D; d++) {
      uncond[d] = (zt[d] - s * x0u[d]) / sqv;
    }
    if (caption.trim() === "") {
      return { cond: uncond.slice(), uncond };
    }
    const template = this.captionTemplate(caption);
    // matched filter on the corrupted latent: does the input contain the
    // caption's features?
    let norm = 0;
    for (let d = 0; d < D; d++) {
      norm += template[d] * template[d];
    }
    norm = Math.sqrt(norm);
    let stat = 0;
    for (let d = 0; d < D; d++) {
      stat += (zt[d] * template[d]) / norm;
    }
    const gate = GATE_MAX / (1.0 + Math.exp(-(stat - GATE_CENTER) / GATE_WIDTH));
    const cond = new Float64Array(D);
    for (let d = 0; d < D; d++) {
      const x0c = x0u[d] + gate * (template[d] - x0u[d]);
      cond[d] = (zt[d] - s * x0c) / sqv;
    }
    return { cond, uncond };
  }

  /**
   * Raw per-frame reward term sums for a window of RGB frames.
   *
   * Encodes every frame, corrupts the whole window jointly with source noise
   * drawn from the request seed, and compares the conditional and
   * unconditional predictions on the same corrupted latents.
   */
  computeRewardTerms(
    frames: Uint8Array[], height: number, width: number, caption: string,
    tNoise: number, seed: number,
  ): { rAlign: number[]; rRec: number[] } {
    if (tNoise < 0 || tNoise >= SCHEDULE_T) {
      throw new Error(`t_noise ${tNoise} outside the schedule [0, ${SCHEDULE_T})`);
    }
    const ab = this.alphaBars[tNoise];
    const s = Math.sqrt(ab);
    const sqv = Math.sqrt(1.0 - ab);
    const rng = new Rng(seed >>> 0);
    const rAlign: number[] = [];
    const rRec: number[] = [];
    for (const frame of frames) {
      const x0 = this.encode(frame, height, width);
      const eps0 = rng.gaussianArray(x0.length);
      const zt = new Float64Array(x0.length);
      for (let d = 0; d < x0.length; d++) {
        zt[d] = s * x0[d] + sqv * eps0[d];
      }
      const { cond, uncond } = this.predictNoisePair(zt, tNoise, caption);
      let align = 0;
      let rec = 0;
      for (let d = 0; d < x0.length; d++) {
        const da = cond[d] - uncond[d];
        const du = uncond[d] - eps0[d];
        const dc = cond[d] - eps0[d];
        align += da * da;
        rec += du * du - dc * dc;
      }
      rAlign.push(align);
      rRec.push(rec);
    }
    return { rAlign, rRec };
  }
}
