/** Model sanity: schedule anchors, encoder behavior, caption separation. */

import { describe, expect, it } from "vitest";

import {
  LATENT, NATIVE_RESOLUTION, ProceduralDiffusionModel, alphaBars, resizeNearest,
} from "../src/model.js";

// The client builds its schedule from the handshake's schedule_T with the
// same linear-beta convention; these anchors were computed by an independent
// cumulative-product loop.
const ALPHA_BAR_999 = 4.0358297653756754e-5;
const ALPHA_BAR_449 = 0.12698985951130629;

/** Render a caption's own template as a curated RGB image. */
function curatedImage(model: ProceduralDiffusionModel, caption: string): Uint8Array {
  const template = model.captionTemplate(caption);
  const out = new Uint8Array(NATIVE_RESOLUTION * NATIVE_RESOLUTION * 3);
  const block = NATIVE_RESOLUTION / LATENT;
  for (let i = 0; i < NATIVE_RESOLUTION; i++) {
    for (let j = 0; j < NATIVE_RESOLUTION; j++) {
      const v = template[Math.floor(i / block) * LATENT + Math.floor(j / block)];
      const u8 = Math.max(0, Math.min(255, Math.round(v * 255)));
      const base = (i * NATIVE_RESOLUTION + j) * 3;
      out[base] = out[base + 1] = out[base + 2] = u8;
    }
  }
  return out;
}

describe("schedule", () => {
  it("matches the independent cumulative-product anchors", () => {
    const ab = alphaBars();
    expect(ab[999]).toBeCloseTo(ALPHA_BAR_999, 12);
    expect(Math.abs(ab[449] - ALPHA_BAR_449)).toBeLessThan(1e-12);
    for (let t = 1; t < 1000; t++) {
      expect(ab[t]).toBeLessThan(ab[t - 1]);
    }
  });
});

describe("encoder", () => {
  it("is deterministic and shape-stable", () => {
    const model = new ProceduralDiffusionModel();
    const frame = new Uint8Array(8 * 8 * 3).map((_, i) => (i * 7) % 256);
    const a = model.encode(frame, 8, 8);
    const b = model.encode(frame, 8, 8);
    expect(a).toEqual(b);
    expect(a.length).toBe(LATENT * LATENT);
    for (const v of a) {
      expect(v).toBeGreaterThanOrEqual(0);
      expect(v).toBeLessThanOrEqual(1);
    }
  });

  it("nearest-resize preserves native-resolution frames", () => {
    const frame = new Uint8Array(NATIVE_RESOLUTION * NATIVE_RESOLUTION * 3)
      .map((_, i) => i % 256);
    expect(resizeNearest(frame, NATIVE_RESOLUTION, NATIVE_RESOLUTION,
      NATIVE_RESOLUTION)).toBe(frame);
  });
});

describe("caption grounding", () => {
  it("is deterministic and distinct across captions", () => {
    const model = new ProceduralDiffusionModel();
    const a1 = model.captionTemplate("a dog standing");
    const a2 = model.captionTemplate("a dog standing");
    const b = model.captionTemplate("a car");
    expect(a1).toEqual(a2);
    let dist = 0;
    for (let d = 0; d < a1.length; d++) {
      dist += (a1[d] - b[d]) ** 2;
    }
    expect(dist).toBeGreaterThan(0.5);
  });

  it("empty caption collapses conditional onto unconditional", () => {
    const model = new ProceduralDiffusionModel();
    const zt = new Float64Array(LATENT * LATENT).map(() => 0.3);
    const { cond, uncond } = model.predictNoisePair(zt, 450, "");
    expect(cond).toEqual(uncond);
  });
});

describe("checkpoint sanity", () => {
  it("aligned captions earn a positive mean alignment gap at t=450", () => {
    // curated image drawn from the "a dog standing" grounding, scored under
    // its own caption vs an unrelated one, over 32 seeds (direction only)
    const model = new ProceduralDiffusionModel();
    const image = curatedImage(model, "a dog standing");
    let gap = 0;
    for (let seed = 0; seed < 32; seed++) {
      const aligned = model.computeRewardTerms(
        [image], NATIVE_RESOLUTION, NATIVE_RESOLUTION, "a dog standing", 450, seed);
      const misaligned = model.computeRewardTerms(
        [image], NATIVE_RESOLUTION, NATIVE_RESOLUTION, "a car", 450, seed);
      gap += aligned.rAlign[0] - misaligned.rAlign[0];
    }
    expect(gap / 32).toBeGreaterThan(0);
  });

  it("identical conditioning yields zero alignment terms", () => {
    const model = new ProceduralDiffusionModel();
    const image = curatedImage(model, "a dog standing");
    const out = model.computeRewardTerms(
      [image], NATIVE_RESOLUTION, NATIVE_RESOLUTION, "", 450, 3);
    expect(out.rAlign[0]).toBeCloseTo(0, 12);
    expect(out.rRec[0]).toBeCloseTo(0, 12);
  });
});
