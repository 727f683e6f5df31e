import { spawnSync } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { extract, writeRepresentationFile } from "../src/extract";
import { SimulatedMaskedLM } from "../src/model";
import { sampleSentimentTask } from "../src/sample";

// The file contract is owned by the Python side; when its reader is
// importable, round-trip a real extraction through it.
const probe = spawnSync("python3", ["-c", "import knncal.harness"], { encoding: "utf8" });
const havePython = probe.status === 0;

const LOADER = `
import sys
from knncal.harness import load_representations
ds = load_representations(sys.argv[1])
train = ds.split_instances("train")
print(len(ds.label_space.labels), ds.dim, ds.k_shots,
      sum(len(i.variants) for i in train),
      len(ds.split_instances("dev")), len(ds.split_instances("test")))
`;

describe.skipIf(!havePython)("python reader round trip", () => {
  it("loads an extracted file with no schema errors and the expected counts", () => {
    const task = sampleSentimentTask(16, 8, 0);
    const model = new SimulatedMaskedLM({ hiddenSize: 32 });
    const result = extract(task.examples, task.spec, model, { k: 16, seed: 0 });
    const path = join(mkdtempSync(join(tmpdir(), "crosscheck-")), "reps.jsonl");
    writeRepresentationFile(path, result);

    const run = spawnSync("python3", ["-c", LOADER, path], { encoding: "utf8" });
    expect(run.stderr).toBe("");
    expect(run.status).toBe(0);
    expect(run.stdout.trim()).toBe("2 32 16 512 32 8");
  });
});
