SPLASH = """\

    ███████╗██╗████████╗███╗   ██╗███████╗████████╗███████╗
    ██╔════╝██║╚══██╔══╝████╗  ██║██╔════╝╚══██╔══╝██╔════╝
    █████╗  ██║   ██║   ██╔██╗ ██║█████╗     ██║   ███████╗
    ██╔══╝  ██║   ██║   ██║╚██╗██║██╔══╝     ██║   ╚════██║
    ██║     ██║   ██║   ██║ ╚████║███████╗   ██║   ███████║
    ╚═╝     ╚═╝   ╚═╝   ╚═╝  ╚═══╝╚══════╝   ╚═╝   ╚══════╝
"""
