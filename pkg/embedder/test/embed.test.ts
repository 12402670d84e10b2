import { mkdtemp, readFile, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import { cliMain } from "../src/index.js";
import { embedTexts } from "../src/embed.js";
import { readPostsJsonl } from "../src/posts.js";
import { readBinary, readJsonl, writeBinary } from "../src/vectorIo.js";

async function workspace(): Promise<string> {
  return mkdtemp(join(tmpdir(), "embedder-"));
}

async function writePosts(dir: string, lines: object[]): Promise<string> {
  const path = join(dir, "posts.jsonl");
  await writeFile(path, lines.map((l) => JSON.stringify(l)).join("\n") + "\n");
  return path;
}

const POSTS = [
  { id: "p1", text: "The goyim KNOW about this", label: "C2" },
  { id: "p2", text: "new world order banking cabal" },
  { id: "p3", text: "shut it down" },
];

describe("embedTexts", () => {
  it("writes jsonl that parses with one row per post", async () => {
    const dir = await workspace();
    const posts = await readPostsJsonl(await writePosts(dir, POSTS));
    const out = join(dir, "e.jsonl");
    const summary = await embedTexts({
      posts,
      modelId: "hash:48",
      outPath: out,
      format: "jsonl",
      maxLen: 64,
    });
    expect(summary).toMatchObject({ count: 3, dim: 48, truncatedCount: 0 });
    const { rows, dim } = await readJsonl(out);
    expect(dim).toBe(48);
    expect(rows.map((r) => r.id)).toEqual(["p1", "p2", "p3"]);
  });

  it("writes the binary layout byte-exactly", async () => {
    const dir = await workspace();
    const posts = await readPostsJsonl(await writePosts(dir, POSTS));
    const out = join(dir, "e.bin");
    await embedTexts({ posts, modelId: "hash:8", outPath: out, format: "binary", maxLen: 64 });
    const buf = await readFile(out);
    expect(buf.subarray(0, 4).toString("ascii")).toBe("DMAP");
    expect(buf.readUInt16LE(4)).toBe(1);
    expect(buf.readUInt32LE(6)).toBe(8);
    expect(Number(buf.readBigUInt64LE(10))).toBe(3);
    const { rows } = await readBinary(out);
    expect(rows.map((r) => r.id)).toEqual(["p1", "p2", "p3"]);
  });

  it("repeated text produces identical vectors", async () => {
    const dir = await workspace();
    const posts = await readPostsJsonl(
      await writePosts(dir, [
        { id: "a", text: "identical text" },
        { id: "b", text: "identical text" },
      ])
    );
    const out = join(dir, "e.jsonl");
    await embedTexts({ posts, modelId: "hash:16", outPath: out, format: "jsonl", maxLen: 64 });
    const { rows } = await readJsonl(out);
    expect(Array.from(rows[0].vector)).toEqual(Array.from(rows[1].vector));
  });

  it("counts truncated posts in the summary", async () => {
    const dir = await workspace();
    const long = Array.from({ length: 40 }, (_, i) => `tok${i}`).join(" ");
    const posts = await readPostsJsonl(
      await writePosts(dir, [
        { id: "long", text: long },
        { id: "short", text: "brief" },
      ])
    );
    const summary = await embedTexts({
      posts,
      modelId: "hash:8",
      outPath: join(dir, "e.jsonl"),
      format: "jsonl",
      maxLen: 16,
    });
    expect(summary.truncatedCount).toBe(1);
  });

  it("rejects an empty posts file", async () => {
    const dir = await workspace();
    const path = join(dir, "posts.jsonl");
    await writeFile(path, "\n");
    await expect(readPostsJsonl(path)).rejects.toThrow(/empty dataset/);
  });
});

describe("vectorIo validation", () => {
  it("rejects duplicate ids and ragged vectors", async () => {
    const dir = await workspace();
    await expect(
      writeBinary(
        [
          { id: "a", vector: [1, 2] },
          { id: "a", vector: [3, 4] },
        ],
        join(dir, "x.bin")
      )
    ).rejects.toThrow(/duplicate/);
    await expect(
      writeBinary(
        [
          { id: "a", vector: [1, 2] },
          { id: "b", vector: [3] },
        ],
        join(dir, "x.bin")
      )
    ).rejects.toThrow(/length/);
  });
});

describe("cli", () => {
  it("runs end to end with the offline encoder", async () => {
    const dir = await workspace();
    const posts = await writePosts(dir, POSTS);
    const out = join(dir, "cli.jsonl");
    const code = await cliMain(["--posts", posts, "--out", out, "--model", "hash:24"]);
    expect(code).toBe(0);
    const { dim } = await readJsonl(out);
    expect(dim).toBe(24);
  });

  it("exits 2 on bad flags and 1 on missing input", async () => {
    expect(await cliMain(["--nope"])).toBe(2);
    expect(await cliMain(["--posts", "/nonexistent.jsonl", "--out", "/tmp/x.jsonl"])).toBe(1);
  });
});
