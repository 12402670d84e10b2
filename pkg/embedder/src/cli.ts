#!/usr/bin/env node
// driftmap-embed: posts JSONL in, embedding file (jsonl or DMAP binary) out.
// Exit codes: 0 ok, 1 input errors, 2 bad usage.

import { promises as fs } from "node:fs";
import { embedTexts } from "./embed.js";
import { readPostsJsonl } from "./posts.js";

const USAGE =
  "usage: driftmap-embed --posts P --out O [--model M] [--format jsonl|binary] [--max-len 256] [--link-titles T.json]";

interface Args {
  posts: string;
  out: string;
  model: string;
  format: "jsonl" | "binary";
  maxLen: number;
  linkTitles?: string;
}

function parseArgs(argv: string[]): Args {
  const args: Partial<Args> = { model: "Xenova/bert-base-uncased", format: "jsonl", maxLen: 256 };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) {
        throw new UsageError(`missing value for ${flag}`);
      }
      return argv[i];
    };
    switch (flag) {
      case "--posts":
        args.posts = next();
        break;
      case "--out":
        args.out = next();
        break;
      case "--model":
        args.model = next();
        break;
      case "--format": {
        const fmt = next();
        if (fmt !== "jsonl" && fmt !== "binary") {
          throw new UsageError(`unknown format ${fmt}`);
        }
        args.format = fmt;
        break;
      }
      case "--max-len": {
        const value = parseInt(next(), 10);
        if (!Number.isFinite(value) || value < 1) {
          throw new UsageError("--max-len needs a positive integer");
        }
        args.maxLen = value;
        break;
      }
      case "--link-titles":
        args.linkTitles = next();
        break;
      case "--help":
      case "-h":
        console.log(USAGE);
        process.exit(0);
        break;
      default:
        throw new UsageError(`unknown flag ${flag}`);
    }
  }
  if (!args.posts || !args.out) {
    throw new UsageError("--posts and --out are required");
  }
  return args as Args;
}

class UsageError extends Error {}

export async function main(argv: string[]): Promise<number> {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`driftmap-embed: ${(err as Error).message}\n${USAGE}`);
    return 2;
  }
  try {
    const posts = await readPostsJsonl(args.posts);
    let linkTitles: Map<string, string> | undefined;
    if (args.linkTitles) {
      const raw = JSON.parse(await fs.readFile(args.linkTitles, "utf-8"));
      linkTitles = new Map(Object.entries(raw));
    }
    const summary = await embedTexts({
      posts,
      modelId: args.model,
      outPath: args.out,
      format: args.format,
      maxLen: args.maxLen,
      linkTitles,
    });
    console.log(
      `embedded ${summary.count} posts (dim ${summary.dim}, model ${summary.model}) -> ${args.out}` +
        (summary.truncatedCount > 0 ? `; ${summary.truncatedCount} over-length post(s) truncated` : "")
    );
    return 0;
  } catch (err) {
    console.error(`driftmap-embed: ${(err as Error).message}`);
    return 1;
  }
}

const invokedDirectly = process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop() as string);
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
