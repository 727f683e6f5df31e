export class ExtractorError extends Error {
  constructor(message: string) {
    super(message);
    this.name = new.target.name;
  }
}

export class InvalidPromptSpec extends ExtractorError {}
export class InvalidDemos extends ExtractorError {}
export class InvalidInput extends ExtractorError {}
export class TokenizationError extends ExtractorError {}
export class CoverageError extends ExtractorError {}
