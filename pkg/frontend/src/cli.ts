/** Shared option handling for the figure scripts: --in, --out, --dpi. */

import { readFileSync, writeFileSync } from "fs";

export interface CliArgs {
  input: string;
  output: string;
  dpi: number;
  extra: Map<string, string>;
}

export function parseArgs(argv: string[], usage: string): CliArgs {
  const extra = new Map<string, string>();
  let input = "";
  let output = "";
  let dpi = 96;
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) throw new Error(`missing value for ${a}\n${usage}`);
      return argv[i];
    };
    if (a === "--in") input = next();
    else if (a === "--out") output = next();
    else if (a === "--dpi") dpi = Number(next());
    else if (a.startsWith("--")) extra.set(a.slice(2), next());
    else throw new Error(`unknown argument ${a}\n${usage}`);
  }
  if (!input || !output) {
    throw new Error(`--in and --out are required\n${usage}`);
  }
  if (!Number.isFinite(dpi) || dpi <= 0) {
    throw new Error("--dpi must be a positive number");
  }
  return { input, output, dpi, extra };
}

export function runScript(
  argv: string[],
  usage: string,
  render: (text: string, args: CliArgs) => string,
): void {
  try {
    const args = parseArgs(argv, usage);
    const text = readFileSync(args.input, "utf-8");
    const svg = render(text, args);
    writeFileSync(args.output, svg);
    console.log(`wrote ${args.output}`);
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    process.exitCode = 1;
  }
}
