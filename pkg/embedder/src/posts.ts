import { promises as fs } from "node:fs";

export interface Post {
  id: string;
  text: string;
  timestamp?: number;
  label?: string;
}

export async function readPostsJsonl(path: string): Promise<Post[]> {
  const text = await fs.readFile(path, "utf-8");
  const posts: Post[] = [];
  const seen = new Set<string>();
  let lineno = 0;
  for (const line of text.split("\n")) {
    lineno += 1;
    if (!line.trim()) {
      continue;
    }
    let obj: any;
    try {
      obj = JSON.parse(line);
    } catch (err) {
      throw new Error(`${path}:${lineno}: invalid JSON: ${err}`);
    }
    if (!obj.id || typeof obj.text !== "string" || obj.text.length === 0) {
      throw new Error(`${path}:${lineno}: post needs a non-empty id and text`);
    }
    const id = String(obj.id);
    if (seen.has(id)) {
      throw new Error(`${path}:${lineno}: duplicate post id ${id}`);
    }
    seen.add(id);
    posts.push({
      id,
      text: obj.text,
      timestamp: obj.timestamp ?? undefined,
      label: obj.label ?? undefined,
    });
  }
  if (posts.length === 0) {
    throw new Error(`${path}: empty dataset (no posts)`);
  }
  return posts;
}
