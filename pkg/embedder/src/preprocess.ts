// Text cleaning identical to the engine side: lowercase, links swapped for
// their page titles (or dropped), everything outside [a-z0-9'] stripped,
// whitespace collapsed.

const URL_RE = /(?:https?:\/\/|www\.)\S+/gi;
const KEEP_RE = /[^a-z0-9']+/g;

export function preprocess(text: string, linkTitles?: Map<string, string>): string[] {
  const withLinks = text.replace(URL_RE, (match) => {
    if (linkTitles && linkTitles.has(match)) {
      return ` ${linkTitles.get(match)} `;
    }
    return " ";
  });
  const cleaned = withLinks.toLowerCase().replace(KEEP_RE, " ");
  return cleaned.split(/\s+/).filter((tok) => tok.length > 0);
}

export function cleanText(text: string, linkTitles?: Map<string, string>): string {
  return preprocess(text, linkTitles).join(" ");
}
