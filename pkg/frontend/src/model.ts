import { InvalidInput } from "./errors.js";
import { MASK } from "./prompt.js";
import { deriveRng, hashString } from "./rng.js";

/**
 * The slice of a masked language model this pipeline needs: tokenize for
 * length accounting, map the one [MASK] position to its last-layer hidden
 * state, and score verbalizer words against a hidden state. A real
 * transformer backend implements the same surface; the simulated one below
 * keeps the pipeline runnable and deterministic without weights.
 */
export interface MaskedLM {
  readonly name: string;
  readonly hiddenSize: number;
  readonly maxSequenceLength: number;
  tokenize(text: string): string[];
  isSingleToken(word: string): boolean;
  maskHiddenState(input: string): Float64Array;
  verbalizerLogits(hidden: Float64Array, words: readonly string[]): Float64Array;
}

export interface SimulatedOptions {
  name?: string;
  hiddenSize?: number;
  maxSequenceLength?: number;
}

/**
 * Deterministic stand-in model. Hidden states are seeded from the full input
 * text, so different demonstrations genuinely produce different variants;
 * each vocabulary word owns a fixed output-embedding row and logits are the
 * usual row-times-hidden dot products.
 */
export class SimulatedMaskedLM implements MaskedLM {
  readonly name: string;
  readonly hiddenSize: number;
  readonly maxSequenceLength: number;
  private readonly vocabRows = new Map<string, Float64Array>();

  constructor(options: SimulatedOptions = {}) {
    this.name = options.name ?? "sim-mlm";
    this.hiddenSize = options.hiddenSize ?? 64;
    this.maxSequenceLength = options.maxSequenceLength ?? 512;
    if (this.hiddenSize <= 0 || this.maxSequenceLength <= 0) {
      throw new InvalidInput("hiddenSize and maxSequenceLength must be positive");
    }
  }

  tokenize(text: string): string[] {
    return text.split(/\s+/).filter((t) => t.length > 0);
  }

  /** One vocabulary entry per plain word; anything else would subtokenize. */
  isSingleToken(word: string): boolean {
    return /^[A-Za-z]+$/.test(word);
  }

  maskHiddenState(input: string): Float64Array {
    const masks = input.split(MASK).length - 1;
    if (masks !== 1) {
      throw new InvalidInput(`model input must contain exactly one ${MASK}, found ${masks}`);
    }
    const rng = deriveRng(hashString(this.name), "hidden", input);
    const hidden = new Float64Array(this.hiddenSize);
    for (let i = 0; i < this.hiddenSize; i++) {
      hidden[i] = rng.normal();
    }
    return hidden;
  }

  verbalizerLogits(hidden: Float64Array, words: readonly string[]): Float64Array {
    if (hidden.length !== this.hiddenSize) {
      throw new InvalidInput(`hidden state has length ${hidden.length}, model expects ${this.hiddenSize}`);
    }
    const logits = new Float64Array(words.length);
    for (let w = 0; w < words.length; w++) {
      const row = this.vocabRow(words[w]!);
      let dot = 0;
      for (let i = 0; i < this.hiddenSize; i++) {
        dot += row[i]! * hidden[i]!;
      }
      logits[w] = dot / Math.sqrt(this.hiddenSize);
    }
    return logits;
  }

  private vocabRow(word: string): Float64Array {
    let row = this.vocabRows.get(word);
    if (row === undefined) {
      const rng = deriveRng(hashString(this.name), "vocab", word);
      row = new Float64Array(this.hiddenSize);
      for (let i = 0; i < this.hiddenSize; i++) {
        row[i] = rng.normal();
      }
      this.vocabRows.set(word, row);
    }
    return row;
  }
}

export interface TruncationEvent {
  instanceId: string;
  variantIndex: number;
  droppedTokens: number;
}

/**
 * Fit a concatenation into the model's context window by dropping tokens
 * from the left of the demonstration prefix. The query's templated text is
 * never touched, even if it alone exceeds the window.
 */
export function truncateLeft(
  model: MaskedLM,
  demoParts: readonly string[],
  queryPart: string,
  separator: string,
): { text: string; droppedTokens: number } {
  const full = [...demoParts, queryPart].join(separator);
  const prefix = demoParts.join(separator) + separator;
  const prefixTokens = model.tokenize(prefix);
  const queryTokens = model.tokenize(queryPart);
  const over = prefixTokens.length + queryTokens.length - model.maxSequenceLength;
  if (over <= 0) {
    return { text: full, droppedTokens: 0 };
  }
  const dropped = Math.min(over, prefixTokens.length);
  const kept = prefixTokens.slice(dropped);
  const text = kept.length > 0 ? `${kept.join(" ")} ${queryPart}` : queryPart;
  return { text, droppedTokens: dropped };
}
