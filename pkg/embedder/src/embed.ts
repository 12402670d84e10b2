import { loadEncoder } from "./encoder.js";
import { Post } from "./posts.js";
import { cleanText } from "./preprocess.js";
import { EmbeddingRow, writeBinary, writeJsonl } from "./vectorIo.js";

export interface EmbedJob {
  posts: Post[];
  modelId: string;
  outPath: string;
  format: "jsonl" | "binary";
  maxLen: number;
  linkTitles?: Map<string, string>;
}

export interface EmbedSummary {
  count: number;
  dim: number;
  truncatedCount: number;
  model: string;
}

export async function embedTexts(job: EmbedJob): Promise<EmbedSummary> {
  if (job.posts.length === 0) {
    throw new Error("empty dataset: no posts to embed");
  }
  const encoder = await loadEncoder(job.modelId, job.maxLen);
  const rows: EmbeddingRow[] = [];
  let truncatedCount = 0;
  for (const post of job.posts) {
    const text = cleanText(post.text, job.linkTitles);
    const { vector, truncated } = await encoder.encode(text);
    if (truncated) {
      truncatedCount += 1;
    }
    rows.push({ id: post.id, vector });
  }
  if (job.format === "binary") {
    await writeBinary(rows, job.outPath);
  } else {
    await writeJsonl(rows, job.outPath);
  }
  return {
    count: rows.length,
    dim: rows[0].vector.length,
    truncatedCount,
    model: encoder.id,
  };
}
