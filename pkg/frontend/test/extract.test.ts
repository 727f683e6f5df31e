import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { InvalidInput, TokenizationError } from "../src/errors";
import { extract, writeRepresentationFile, type ExtractResult } from "../src/extract";
import { SimulatedMaskedLM } from "../src/model";
import { sampleSentimentTask, SENTIMENT_SPEC } from "../src/sample";

interface InstanceLine {
  id: string;
  split: string;
  label: string | null;
  variants: Array<{ embedding: number[]; plm_logits: number[] }>;
}

function parsed(result: ExtractResult): { header: Record<string, unknown>; instances: InstanceLine[] } {
  const [head, ...rest] = result.lines;
  return {
    header: JSON.parse(head!) as Record<string, unknown>,
    instances: rest.map((line) => JSON.parse(line) as InstanceLine),
  };
}

describe("extract", () => {
  const task = sampleSentimentTask(16, 8, 0);
  const model = new SimulatedMaskedLM({ hiddenSize: 16 });
  const result = extract(task.examples, task.spec, model, { k: 16, seed: 0 });
  const { header, instances } = parsed(result);

  it("writes the declared header", () => {
    expect(header).toEqual({
      format_version: 1,
      dim: 16,
      labels: ["negative", "positive"],
      k_shots: 16,
    });
  });

  it("caches shots x samplings x classes records for the train split", () => {
    const train = instances.filter((inst) => inst.split === "train");
    expect(train).toHaveLength(32);
    expect(train.reduce((n, inst) => n + inst.variants.length, 0)).toBe(512);
  });

  it("gives every instance K variants of the declared shape, all finite", () => {
    expect(instances).toHaveLength(32 + 32 + 8);
    for (const inst of instances) {
      expect(inst.variants).toHaveLength(16);
      for (const v of inst.variants) {
        expect(v.embedding).toHaveLength(16);
        expect(v.plm_logits).toHaveLength(2);
        for (const x of [...v.embedding, ...v.plm_logits]) {
          expect(Number.isFinite(x)).toBe(true);
        }
      }
    }
  });

  it("is deterministic in the seed and sensitive to it", () => {
    const again = extract(task.examples, task.spec, model, { k: 16, seed: 0 });
    expect(again.lines).toEqual(result.lines);
    const other = extract(task.examples, task.spec, model, { k: 16, seed: 1 });
    expect(other.lines).not.toEqual(result.lines);
  });

  it("changes variants when demonstration order is shuffled", () => {
    const shuffled = extract(task.examples, task.spec, model, { k: 16, seed: 0, shuffleDemoOrder: true });
    expect(shuffled.lines).not.toEqual(result.lines);
    expect(parsed(shuffled).header).toEqual(header);
  });

  it("round-trips through the file system verbatim", () => {
    const path = join(mkdtempSync(join(tmpdir(), "extractor-")), "reps.jsonl");
    writeRepresentationFile(path, result);
    expect(readFileSync(path, "utf8")).toBe(result.lines.join("\n") + "\n");
  });
});

describe("extract error handling", () => {
  const small = sampleSentimentTask(4, 2, 3);
  const model = new SimulatedMaskedLM({ hiddenSize: 8 });

  it("rejects verbalizers that are not single vocabulary tokens", () => {
    const spec = { ...SENTIMENT_SPEC, verbalizers: { negative: "thumbs-down", positive: "great" } };
    expect(() => extract(small.examples, spec, model, { k: 4, seed: 0 })).toThrow(TokenizationError);
  });

  it("rejects supervised splits with the wrong class counts", () => {
    expect(() => extract(small.examples, small.spec, model, { k: 3, seed: 0 })).toThrow(InvalidInput);
    const noDev = small.examples.filter((ex) => ex.split !== "dev");
    expect(() => extract(noDev, small.spec, model, { k: 4, seed: 0 })).toThrow(InvalidInput);
  });

  it("rejects duplicate ids", () => {
    const doubled = [...small.examples, small.examples[0]!];
    expect(() => extract(doubled, small.spec, model, { k: 4, seed: 0 })).toThrow(InvalidInput);
  });

  it("reports truncation per affected variant and still writes every record", () => {
    const cramped = new SimulatedMaskedLM({ hiddenSize: 8, maxSequenceLength: 12 });
    const result = extract(small.examples, small.spec, cramped, { k: 4, seed: 0 });
    expect(result.truncations.length).toBeGreaterThan(0);
    for (const event of result.truncations) {
      expect(event.droppedTokens).toBeGreaterThan(0);
    }
    expect(parsed(result).instances).toHaveLength(small.examples.length);
  });
});
