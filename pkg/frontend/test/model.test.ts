import { describe, expect, it } from "vitest";

import { InvalidInput } from "../src/errors";
import { SimulatedMaskedLM, truncateLeft } from "../src/model";

describe("SimulatedMaskedLM", () => {
  const model = new SimulatedMaskedLM({ hiddenSize: 8, maxSequenceLength: 32 });

  it("encodes deterministically and distinguishes inputs", () => {
    const a = model.maskHiddenState("one input with [MASK].");
    const b = model.maskHiddenState("one input with [MASK].");
    const c = model.maskHiddenState("another input with [MASK].");
    expect(Array.from(a)).toEqual(Array.from(b));
    expect(Array.from(a)).not.toEqual(Array.from(c));
    expect(a).toHaveLength(8);
    for (const v of a) expect(Number.isFinite(v)).toBe(true);
  });

  it("insists on exactly one mask in the input", () => {
    expect(() => model.maskHiddenState("no mask here")).toThrow(InvalidInput);
    expect(() => model.maskHiddenState("[MASK] and [MASK]")).toThrow(InvalidInput);
  });

  it("scores verbalizers as reproducible dot products", () => {
    const h = model.maskHiddenState("score this [MASK].");
    const once = model.verbalizerLogits(h, ["great", "terrible"]);
    const twice = model.verbalizerLogits(h, ["great", "terrible"]);
    expect(Array.from(once)).toEqual(Array.from(twice));
    expect(once).toHaveLength(2);
    const repeated = model.verbalizerLogits(h, ["great", "great"]);
    expect(repeated[0]).toBe(repeated[1]);
  });

  it("rejects a hidden state of the wrong size", () => {
    expect(() => model.verbalizerLogits(new Float64Array(4), ["great"])).toThrow(InvalidInput);
  });

  it("treats plain words as single tokens and anything else as subtokenized", () => {
    expect(model.isSingleToken("great")).toBe(true);
    expect(model.isSingleToken("well-known")).toBe(false);
    expect(model.isSingleToken("very good")).toBe(false);
  });
});

describe("truncateLeft", () => {
  const model = new SimulatedMaskedLM({ hiddenSize: 4, maxSequenceLength: 8 });

  it("leaves short inputs untouched", () => {
    const { text, droppedTokens } = truncateLeft(model, ["aa bb"], "cc dd", " | ");
    expect(text).toBe("aa bb | cc dd");
    expect(droppedTokens).toBe(0);
  });

  it("drops leading demonstration tokens and preserves the query", () => {
    // prefix "aa bb cc | dd ee | " is 7 tokens, query 3: two over budget
    const { text, droppedTokens } = truncateLeft(model, ["aa bb cc", "dd ee"], "qq rr ss", " | ");
    expect(droppedTokens).toBe(2);
    expect(text).toBe("cc | dd ee | qq rr ss");
    expect(text.endsWith("qq rr ss")).toBe(true);
  });

  it("keeps an oversized query whole rather than truncating it", () => {
    const tiny = new SimulatedMaskedLM({ hiddenSize: 4, maxSequenceLength: 2 });
    const query = "one two three four";
    const { text, droppedTokens } = truncateLeft(tiny, ["aa bb"], query, " | ");
    expect(text).toBe(query);
    expect(droppedTokens).toBe(3); // the whole prefix, separator included
  });
});
