/** Docs view: page list on the left, selected manual page on the right. */

import { ApiClient, ApiError } from "./api.js";

export class DocsView {
  private readonly list = document.createElement("ul");
  private readonly article = document.createElement("article");

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {}

  async mount(): Promise<void> {
    this.list.className = "doc-list";
    this.article.className = "doc-page";
    this.root.append(this.list, this.article);
    const pages = await this.api.docPages();
    for (const page of pages) {
      const item = document.createElement("li");
      const link = document.createElement("a");
      link.href = `#docs/${page}`;
      link.textContent = page;
      link.addEventListener("click", (e) => {
        e.preventDefault();
        void this.show(page);
      });
      item.append(link);
      this.list.append(item);
    }
    if (pages.length) await this.show(pages[0] as string);
  }

  async show(page: string): Promise<void> {
    try {
      const doc = await this.api.docPage(page);
      this.article.textContent = "";
      const h = document.createElement("h2");
      h.textContent = doc.title;
      const body = document.createElement("pre");
      body.textContent = doc.body;
      this.article.append(h, body);
    } catch (err) {
      this.article.textContent =
        err instanceof ApiError ? `[${err.code}] ${err.message}` : String(err);
    }
  }
}
