import { InvalidDemos, InvalidInput, InvalidPromptSpec } from "./errors.js";

export const MASK = "[MASK]";
export const DEFAULT_SEPARATOR = " [SEP] ";

export interface PromptSpec {
  /** Contains <TEXT> (and optionally <TEXT2>) plus exactly one [MASK]. */
  template: string;
  /** label -> verbalizer word; key insertion order fixes the label order. */
  verbalizers: Record<string, string>;
  /** Joiner between templated parts; defaults to " [SEP] ". */
  separator?: string;
}

export interface Example {
  id: string;
  text: string;
  text2?: string;
  label?: string | null;
}

export interface SplitExample extends Example {
  split: "train" | "dev" | "test";
}

export function labelOrder(spec: PromptSpec): string[] {
  return Object.keys(spec.verbalizers);
}

export function validatePromptSpec(spec: PromptSpec): void {
  const masks = spec.template.split(MASK).length - 1;
  if (masks !== 1) {
    throw new InvalidPromptSpec(`template must contain exactly one ${MASK}, found ${masks}`);
  }
  if (!spec.template.includes("<TEXT>")) {
    throw new InvalidPromptSpec("template must contain <TEXT>");
  }
  const labels = labelOrder(spec);
  if (labels.length === 0) {
    throw new InvalidPromptSpec("verbalizer map is empty");
  }
  for (const label of labels) {
    const word = spec.verbalizers[label];
    if (word === undefined || word.trim() === "" || /\s/.test(word)) {
      throw new InvalidPromptSpec(`label ${JSON.stringify(label)} needs a single non-empty verbalizer word`);
    }
  }
}

/**
 * Instantiate the template for one example. With maskWord the mask slot is
 * filled (demonstration form); without it the literal [MASK] stays (query
 * form). The mask is substituted before the texts so a text containing the
 * mask token cannot capture the replacement.
 */
export function fillTemplate(spec: PromptSpec, ex: Example, maskWord?: string): string {
  let out = maskWord === undefined ? spec.template : spec.template.replace(MASK, maskWord);
  if (out.includes("<TEXT2>")) {
    if (ex.text2 === undefined) {
      throw new InvalidInput(`example ${ex.id}: template needs <TEXT2> but the example has no second text`);
    }
    out = out.split("<TEXT2>").join(ex.text2);
  }
  return out.split("<TEXT>").join(ex.text);
}

export interface DemoParts {
  demoParts: string[];
  queryPart: string;
  separator: string;
}

/**
 * Templated pieces of a demonstration concatenation, demos in the given
 * order. Enforces exactly one demo per label and that the query never
 * demonstrates itself.
 */
export function buildDemoParts(x: Example, demos: readonly Example[], spec: PromptSpec): DemoParts {
  validatePromptSpec(spec);
  const labels = labelOrder(spec);
  const seen = new Set<string>();
  for (const demo of demos) {
    if (demo.label == null) {
      throw new InvalidDemos(`demonstration ${demo.id} is unlabeled`);
    }
    if (!labels.includes(demo.label)) {
      throw new InvalidDemos(`demonstration ${demo.id} has unknown label ${JSON.stringify(demo.label)}`);
    }
    if (seen.has(demo.label)) {
      throw new InvalidDemos(`two demonstrations for label ${JSON.stringify(demo.label)}`);
    }
    if (demo.id === x.id) {
      throw new InvalidDemos(`query ${x.id} cannot be its own demonstration`);
    }
    seen.add(demo.label);
  }
  for (const label of labels) {
    if (!seen.has(label)) {
      throw new InvalidDemos(`no demonstration for label ${JSON.stringify(label)}`);
    }
  }
  return {
    demoParts: demos.map((d) => fillTemplate(spec, d, spec.verbalizers[d.label as string])),
    queryPart: fillTemplate(spec, x),
    separator: spec.separator ?? DEFAULT_SEPARATOR,
  };
}

/** Full concatenated input: demo parts then the query, masks filled on demos only. */
export function buildDemoInput(x: Example, demos: readonly Example[], spec: PromptSpec): string {
  const parts = buildDemoParts(x, demos, spec);
  return [...parts.demoParts, parts.queryPart].join(parts.separator);
}
